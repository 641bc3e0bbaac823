"""Online multi-choice knapsack budget enforcement.

The query horizon ``Q`` is cut into ``N = ceil(Q / bin_size)`` bins, each
funded with ``B / N``; unspent money spills into the next bin. Within a bin,
an arm is eligible when its cost is below a threshold that shrinks
exponentially with the bin's budget utilization ``z``::

    threshold = reward_est / ((UB * e / LB) ** z * (LB / e))

If no arm passes, any arm costing at most ``B_left / Q_left`` is allowed; if
none of those exist either, the run stops with :class:`InsufficientBudget`.
Among the eligible arms the one with the highest reward estimate is served.

Two documented readings are on by default and can be switched off to get the
pseudocode verbatim:

``clamp_utilization``
    ``z`` is capped at 1 when evaluating the threshold (spillover can push raw
    utilization past 1).
``strict_budget``
    an arm is never eligible if it costs more than the money left, so total
    spend cannot exceed ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import ArmId, Dataset, ceil_div

Z_SLACK = 1e-9


class CostPolicyError(ValueError):
    pass


class InsufficientBudget(RuntimeError):
    """No arm fits the remaining budget for query ``t`` (0-based)."""

    def __init__(self, t: int):
        super().__init__(f"Insufficient budget at query {t}")
        self.t = t


@dataclass(frozen=True)
class CostPolicyConfig:
    budget: float
    horizon: int
    ub: float
    lb: float
    bin_size: int = 100
    clamp_utilization: bool = True
    strict_budget: bool = True

    def __post_init__(self):
        if not self.budget > 0:
            raise CostPolicyError("budget must be positive")
        if self.horizon < 1 or self.bin_size < 1:
            raise CostPolicyError("horizon and bin_size must be positive")
        if not self.lb > 0:
            raise CostPolicyError("LB must be positive")
        if not self.ub > self.lb:
            raise CostPolicyError("UB must exceed LB")

    @property
    def n_bins(self) -> int:
        return ceil_div(self.horizon, self.bin_size)

    @property
    def bin_budget(self) -> float:
        return self.budget / self.n_bins

    def bin_sizes(self) -> list[int]:
        return [min(self.bin_size, self.horizon - i * self.bin_size) for i in range(self.n_bins)]


@dataclass
class CostPolicyState:
    z: float
    z_raw: float
    B_left: float
    bin_index: int
    queries_left_in_bin: int
    spend_total: float = 0.0
    t: int = 0
    # per-bin ledger: (allocated, inherited, spent, passed_on)
    bins: list = field(default_factory=list)

    @classmethod
    def initial(cls, cfg: CostPolicyConfig) -> "CostPolicyState":
        state = cls(z=0.0, z_raw=0.0, B_left=cfg.bin_budget, bin_index=0,
                    queries_left_in_bin=cfg.bin_sizes()[0])
        state.bins.append([cfg.bin_budget, 0.0, 0.0, None])
        return state


@dataclass(frozen=True)
class TraceStep:
    t: int
    bin: int
    chosen_arm: int
    cost: float
    B_left: float
    z: float
    fallback: bool


def eligibility_threshold(reward_est, z, ub: float, lb: float):
    """Maximum admissible cost at utilization ``z`` (vectorized in ``reward_est``)."""
    if not lb > 0:
        raise CostPolicyError("LB must be positive")
    return np.asarray(reward_est, dtype=float) / ((ub * math.e / lb) ** z * (lb / math.e))


def filter_eligible(reward_ests, costs, state: CostPolicyState, cfg: CostPolicyConfig) -> tuple[np.ndarray, bool]:
    """Eligible arm indices and whether the per-query fallback was needed.

    Raises :class:`InsufficientBudget` when even the fallback set is empty.
    """
    reward_ests = np.asarray(reward_ests, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if reward_ests.shape != costs.shape:
        raise CostPolicyError("reward estimates and costs must have the same length")
    z = min(state.z_raw, 1.0) if cfg.clamp_utilization else state.z_raw
    ok = costs <= eligibility_threshold(reward_ests, z, cfg.ub, cfg.lb)
    if cfg.strict_budget:
        ok &= costs <= state.B_left
    if ok.any():
        return np.flatnonzero(ok), False
    per_query = state.B_left / state.queries_left_in_bin
    ok = costs <= per_query
    if ok.any():
        return np.flatnonzero(ok), True
    raise InsufficientBudget(state.t)


def advance_bin(state: CostPolicyState, cfg: CostPolicyConfig) -> None:
    if state.queries_left_in_bin != 0:
        raise CostPolicyError("current bin still has queries left")
    if state.bin_index + 1 >= cfg.n_bins:
        raise CostPolicyError("no bins left to advance into")
    state.bins[-1][3] = state.B_left
    state.bin_index += 1
    state.bins.append([cfg.bin_budget, state.B_left, 0.0, None])
    state.B_left += cfg.bin_budget
    state.z = state.z_raw = 0.0
    state.queries_left_in_bin = cfg.bin_sizes()[state.bin_index]


def choose(reward_ests, costs, state: CostPolicyState, cfg: CostPolicyConfig) -> TraceStep:
    """Serve one query: pick the best eligible arm and charge its cost."""
    if state.t >= cfg.horizon:
        raise CostPolicyError("query horizon exhausted")
    if state.queries_left_in_bin == 0:
        advance_bin(state, cfg)
    eligible, fallback = filter_eligible(reward_ests, costs, state, cfg)
    est = np.asarray(reward_ests, dtype=float)[eligible]
    arm = int(eligible[np.argmax(est)])
    cost = float(np.asarray(costs, dtype=float)[arm])
    state.B_left -= cost
    state.spend_total += cost
    state.z_raw += cost / cfg.bin_budget
    state.z = min(state.z_raw, 1.0 + Z_SLACK) if cfg.clamp_utilization else state.z_raw
    state.bins[-1][2] += cost
    state.queries_left_in_bin -= 1
    step = TraceStep(state.t, state.bin_index, arm, cost, state.B_left, state.z_raw, fallback)
    state.t += 1
    return step


class OnlineCostPolicy:
    """Stateful wrapper over one replay stream."""

    def __init__(self, config: CostPolicyConfig):
        self.config = config
        self.state = CostPolicyState.initial(config)
        self.trace: list[TraceStep] = []

    def choose(self, reward_ests, costs) -> int:
        step = choose(reward_ests, costs, self.state, self.config)
        self.trace.append(step)
        return step.chosen_arm

    @property
    def spend_total(self) -> float:
        return self.state.spend_total

    def bin_ledger(self) -> list[tuple[float, float, float, float]]:
        """Per-bin ``(allocated, inherited, spent, passed_on)``."""
        rows = [list(r) for r in self.state.bins]
        rows[-1][3] = self.state.B_left
        return [tuple(r) for r in rows]


def estimate_bounds(
    tuning: Dataset,
    reward_fn: Callable[[Dataset], np.ndarray] | np.ndarray,
    percentiles: tuple[float, float] = (1.0, 99.0),
    widen: float = 1.5,
) -> tuple[float, float]:
    """``(UB, LB)`` from the reward-to-cost ratios seen on tuning data.

    Ratios are taken over every (record, arm) pair with positive cost and
    positive reward estimate. UB is the upper percentile times ``widen``; LB
    the lower percentile divided by ``widen``.
    """
    if len(tuning) == 0:
        raise CostPolicyError("tuning data is empty")
    est = reward_fn if isinstance(reward_fn, np.ndarray) else reward_fn(tuning)
    est = np.asarray(est, dtype=float)
    costs = tuning.costs
    if est.shape != costs.shape:
        raise CostPolicyError("reward estimates must have shape (n_records, n_arms)")
    mask = (costs > 0) & (est > 0)
    if not mask.any():
        raise CostPolicyError("no positive-cost entries with positive reward estimates")
    ratios = est[mask] / costs[mask]
    lo, hi = np.percentile(ratios, percentiles)
    return float(hi * widen), float(lo / widen)


@dataclass(frozen=True)
class TokenCostStats:
    """Per-arm token prices and mean output length measured on tuning data."""

    input_price: dict[int, float]
    output_price: dict[int, float]
    mean_output_tokens: dict[int, float]

    @classmethod
    def from_arms(cls, arms: Sequence[ArmId]) -> "TokenCostStats":
        missing = [a.name for a in arms if None in (a.input_price, a.output_price, a.mean_output_tokens)]
        if missing:
            raise CostPolicyError(f"manifest lacks token pricing for arms: {missing}")
        return cls(
            {a.index: a.input_price for a in arms},
            {a.index: a.output_price for a in arms},
            {a.index: a.mean_output_tokens for a in arms},
        )

    @classmethod
    def from_tuning(cls, output_tokens: dict[int, Sequence[float]], input_price: dict[int, float], output_price: dict[int, float]) -> "TokenCostStats":
        means = {a: float(np.mean(v)) for a, v in output_tokens.items()}
        return cls(dict(input_price), dict(output_price), means)


def estimate_query_cost(query_tokens: int, arm: int | ArmId, stats: TokenCostStats) -> float:
    idx = arm.index if isinstance(arm, ArmId) else int(arm)
    try:
        return stats.input_price[idx] * query_tokens + stats.output_price[idx] * stats.mean_output_tokens[idx]
    except KeyError:
        raise CostPolicyError(f"no token statistics for arm {idx}") from None
