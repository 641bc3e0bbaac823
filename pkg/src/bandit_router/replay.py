"""Offline replay of bandit learning and budgeted deployment.

Learning replays walk a dataset in order, let the policy pick an arm, and
reveal only that arm's score. Regret is accounted against the best score in
the record, which the policy never sees. Deployment replays freeze the
policy, rank arms greedily by reward estimate and let the cost policy decide
what is affordable.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bandit import BasePolicy
from .cost_policy import CostPolicyConfig, InsufficientBudget, OnlineCostPolicy, TraceStep, estimate_bounds
from .data import Dataset
from .pretrain import Projection


class ReplayError(ValueError):
    pass


@dataclass
class ReplayReport:
    policy: str
    steps: int
    cumulative_reward: float
    cumulative_regret: float
    reward_by_step: np.ndarray
    regret_curve: np.ndarray
    arm_counts: np.ndarray
    spend_trace: list[TraceStep] = field(default_factory=list)
    deployment_performance: float | None = None
    budget: float | None = None
    budget_used: float = 0.0
    terminated: bool = False
    terminated_at: int | None = None
    widths: np.ndarray | None = None
    covariance_traces: np.ndarray | None = None

    def summary(self) -> dict:
        out = {
            "policy": self.policy,
            "steps": self.steps,
            "cumulative_reward": self.cumulative_reward,
            "cumulative_regret": self.cumulative_regret,
            "arm_counts": [int(c) for c in self.arm_counts],
            "deployment_performance": self.deployment_performance,
            "budget": self.budget,
            "budget_used": self.budget_used,
            "terminated": self.terminated,
            "terminated_at": self.terminated_at,
        }
        return out


def _name(policy) -> str:
    return type(policy).__name__


def _contexts(dataset: Dataset, projection: Projection) -> np.ndarray:
    if len(dataset) == 0:
        raise ReplayError("dataset is empty")
    if projection.d_e != dataset.d_e:
        raise ReplayError(
            f"projection expects d_e={projection.d_e} but dataset has d_e={dataset.d_e}"
        )
    return projection.project_many(dataset.embeddings)


def _width_and_trace(policy, arm: int, psi):
    width = getattr(policy, "exploration_width", None)
    w = float(width(arm, psi)) if width is not None else np.nan
    est = getattr(policy, "estimator_", policy)
    A_inv = getattr(est, "A_inv_", None)
    tr = float(np.trace(A_inv[arm])) if A_inv is not None else np.nan
    return w, tr


def run_learning(
    policy: BasePolicy,
    learning: Dataset,
    projection: Projection,
    binarize_threshold: float | None = None,
    track_exploration: bool = False,
) -> ReplayReport:
    """Online learning pass with bandit feedback and no budget constraint.

    With ``binarize_threshold`` the policy is fed ``1.0`` when the chosen
    score reaches the threshold and ``0.0`` otherwise (thumbs up/down); the
    report always accounts the raw scores.
    """
    psi = _contexts(learning, projection)
    scores = learning.scores
    n, k = scores.shape
    chosen_scores = np.empty(n)
    counts = np.zeros(k, dtype=int)
    widths = np.empty(n) if track_exploration else None
    traces = np.empty(n) if track_exploration else None
    for t in range(n):
        arm = policy.select(psi[t])
        if track_exploration:
            widths[t], traces[t] = _width_and_trace(policy, arm, psi[t])
        s = float(scores[t, arm])
        reward = s if binarize_threshold is None else float(s >= binarize_threshold)
        policy.update(arm, psi[t], reward)
        chosen_scores[t] = s
        counts[arm] += 1
    regret_steps = scores.max(axis=1) - chosen_scores
    return ReplayReport(
        policy=_name(policy),
        steps=n,
        cumulative_reward=float(chosen_scores.sum()),
        cumulative_regret=float(regret_steps.sum()),
        reward_by_step=chosen_scores,
        regret_curve=np.cumsum(regret_steps),
        arm_counts=counts,
        widths=widths,
        covariance_traces=traces,
    )


def run_deployment(
    policy: BasePolicy,
    deployment: Dataset,
    projection: Projection,
    cost_config: CostPolicyConfig | None = None,
    greedy: bool = True,
) -> ReplayReport:
    """Serve the deployment bucket with a frozen policy.

    Reward estimates are the greedy cosine estimates (``greedy=False`` uses
    UCB scores where the policy has them). Queries left unserved after an
    insufficient-budget stop contribute zero to ``deployment_performance``,
    which is averaged over the whole bucket.
    """
    policy = copy.deepcopy(policy)  # never mutate the trained router
    psi = _contexts(deployment, projection)
    scores, costs = deployment.scores, deployment.costs
    n, k = scores.shape
    if cost_config is not None and cost_config.horizon != n:
        raise ReplayError(f"cost horizon {cost_config.horizon} != deployment size {n}")
    cost_policy = OnlineCostPolicy(cost_config) if cost_config is not None else None
    chosen = []
    counts = np.zeros(k, dtype=int)
    spent = 0.0
    terminated_at = None
    for t in range(n):
        if not greedy and hasattr(policy, "ucb_scores"):
            est = policy.ucb_scores(psi[t])
        else:
            est = policy.reward_estimates(psi[t])
        if cost_policy is None:
            arm = int(np.argmax(est))
            spent += float(costs[t, arm])
        else:
            try:
                arm = cost_policy.choose(est, costs[t])
            except InsufficientBudget:
                terminated_at = t
                break
        chosen.append(float(scores[t, arm]))
        counts[arm] += 1
    chosen = np.array(chosen)
    served = len(chosen)
    best = scores[:served].max(axis=1) if served else np.zeros(0)
    regret = np.cumsum(best - chosen)
    return ReplayReport(
        policy=_name(policy),
        steps=served,
        cumulative_reward=float(chosen.sum()),
        cumulative_regret=float(regret[-1]) if served else 0.0,
        reward_by_step=chosen,
        regret_curve=regret,
        arm_counts=counts,
        spend_trace=list(cost_policy.trace) if cost_policy else [],
        deployment_performance=float(chosen.sum() / n),
        budget=cost_config.budget if cost_config else None,
        budget_used=cost_policy.spend_total if cost_policy else spent,
        terminated=terminated_at is not None,
        terminated_at=terminated_at,
    )


def tune_hyperparams(
    factory: Callable[[float], BasePolicy],
    tuning: Dataset,
    projection: Projection,
    grid: Iterable[float],
    binarize_threshold: float | None = None,
) -> tuple[float, dict[float, float]]:
    """Grid point maximizing cumulative learning reward on ``tuning``.

    Ties go to the smaller value.
    """
    grid = sorted(grid)
    if not grid:
        raise ReplayError("empty hyperparameter grid")
    rewards = {}
    best, best_reward = None, -np.inf
    for value in grid:
        report = run_learning(factory(value), tuning, projection, binarize_threshold)
        rewards[value] = report.cumulative_reward
        if report.cumulative_reward > best_reward:
            best, best_reward = value, report.cumulative_reward
    return best, rewards


def learning_size_curve(
    factory: Callable[[], BasePolicy],
    learning: Dataset,
    deployment: Dataset,
    projection: Projection,
    fractions: Sequence[float],
    cost_config: CostPolicyConfig | None = None,
) -> list[tuple[float, float]]:
    """Deployment performance after learning on growing prefixes of ``learning``."""
    curve = []
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ReplayError(f"fraction {f} outside (0, 1]")
        n = int(f * len(learning))
        if n < 1:
            raise ReplayError(f"fraction {f} leaves no learning records")
        policy = factory()
        run_learning(policy, learning.head(n), projection)
        rep = run_deployment(policy, deployment, projection, cost_config)
        curve.append((f, rep.deployment_performance))
    return curve


@dataclass
class ShiftReport:
    boundary: int
    windows: dict[str, dict[str, float]]
    learning: ReplayReport

    def to_dict(self) -> dict:
        return {"boundary": self.boundary, "windows": self.windows}


def distribution_shift_replay(
    policy: BasePolicy,
    stream_a: Dataset,
    stream_b: Dataset,
    projection: Projection,
    probe_window: int,
    after_delay: int | None = None,
) -> ShiftReport:
    """Learn over ``stream_a`` followed by ``stream_b`` and probe three windows.

    ``before`` is the last ``probe_window`` steps of ``stream_a``, ``during``
    the first ``probe_window`` steps of ``stream_b``, and ``after`` the
    ``probe_window`` steps ending ``after_delay`` steps past the boundary
    (default: the end of ``stream_b``).
    """
    if stream_a.arms != stream_b.arms or stream_a.d_e != stream_b.d_e:
        raise ReplayError("streams must share the arm pool and d_e")
    n_a, n_b = len(stream_a), len(stream_b)
    after_delay = n_b if after_delay is None else after_delay
    if probe_window < 1 or probe_window > n_a or probe_window > n_b:
        raise ReplayError("probe window larger than a stream")
    if after_delay > n_b or after_delay < probe_window:
        raise ReplayError("after_delay must lie in [probe_window, len(stream_b)]")
    combined = Dataset(
        records=stream_a.records + stream_b.records, arms=stream_a.arms, d_e=stream_a.d_e
    )
    report = run_learning(policy, combined, projection, track_exploration=True)
    spans = {
        "before": (n_a - probe_window, n_a),
        "during": (n_a, n_a + probe_window),
        "after": (n_a + after_delay - probe_window, n_a + after_delay),
    }
    windows = {}
    for name, (lo, hi) in spans.items():
        w = report.widths[lo:hi]
        windows[name] = {
            "start": lo,
            "stop": hi,
            "mean_reward": float(report.reward_by_step[lo:hi].mean()),
            "mean_width": float(np.mean(w)),
            "std_width": float(np.std(w)),
            "mean_covariance_trace": float(np.mean(report.covariance_traces[lo:hi])),
        }
    return ShiftReport(boundary=n_a, windows=windows, learning=report)


def oracle_performance(dataset: Dataset) -> float:
    return float(dataset.scores.max(axis=1).mean())


def oracle_spend(dataset: Dataset) -> float:
    """Spend of routing every query to its best-scoring arm."""
    best = np.argmax(dataset.scores, axis=1)
    return float(dataset.costs[np.arange(len(dataset)), best].sum())


def sweep_budget(
    policies: dict[str, BasePolicy],
    deployment: Dataset,
    projection: Projection,
    budgets: Sequence[float],
    ub: float,
    lb: float,
    bin_size: int = 100,
) -> list[dict]:
    """Performance-vs-budget rows for each (policy, budget) pair."""
    rows = []
    for name, policy in policies.items():
        for budget in budgets:
            cfg = CostPolicyConfig(budget=budget, horizon=len(deployment), ub=ub, lb=lb, bin_size=bin_size)
            rep = run_deployment(policy, deployment, projection, cfg)
            rows.append(
                {
                    "policy": name,
                    "budget": float(budget),
                    "performance": rep.deployment_performance,
                    "budget_used": rep.budget_used,
                    "terminated": rep.terminated,
                }
            )
    return rows


DEFAULT_LAMBDA_GRID = tuple(np.concatenate([[0.0], np.geomspace(1e-2, 1e4, 121)]))


def offline_tradeoff_performance(
    policy: BasePolicy,
    deployment: Dataset,
    projection: Projection,
    budget: float,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
) -> tuple[float, float]:
    """Hindsight ``P - lambda * C`` router for one budget.

    Each query goes to ``argmax(estimate - lambda * cost)``; ``lambda`` is
    picked over the whole deployment set as the grid value with the best
    true performance whose total spend fits ``budget``. Returns
    ``(performance, lambda)``; performance is ``nan`` if no grid value fits.
    """
    policy = copy.deepcopy(policy)
    est = np.asarray(policy.reward_estimates(_contexts(deployment, projection)))
    scores, costs = deployment.scores, deployment.costs
    rows = np.arange(len(deployment))
    best_perf, best_lam = np.nan, np.nan
    for lam in sorted(lambda_grid):
        arm = np.argmax(est - lam * costs, axis=1)
        if costs[rows, arm].sum() > budget:
            continue
        perf = float(scores[rows, arm].mean())
        if not perf <= best_perf:  # also true while best_perf is nan
            best_perf, best_lam = perf, float(lam)
    return best_perf, best_lam


def tune_bin_size(
    policy: BasePolicy,
    tuning: Dataset,
    projection: Projection,
    budget_per_query: float,
    ub: float,
    lb: float,
    candidates: Sequence[int] = (1, 10, 100),
) -> tuple[int, dict[int, float]]:
    """Bin size giving the best deployment performance on ``tuning`` at the
    same per-query budget. Ties go to the larger bin."""
    if not candidates:
        raise ReplayError("no bin size candidates")
    perf = {}
    n = len(tuning)
    for s in sorted(candidates):
        cfg = CostPolicyConfig(budget_per_query * n, n, ub, lb, bin_size=s)
        perf[s] = run_deployment(policy, tuning, projection, cfg).deployment_performance
    best = max(sorted(perf, reverse=True), key=lambda s: perf[s])
    return best, perf


def policy_bounds(policy: BasePolicy, tuning: Dataset, projection: Projection) -> tuple[float, float]:
    """``(UB, LB)`` from ``policy``'s greedy estimates on the tuning bucket."""
    est = copy.deepcopy(policy).reward_estimates(_contexts(tuning, projection))
    return estimate_bounds(tuning, np.asarray(est))
