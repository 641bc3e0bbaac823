"""End-to-end routing experiments on synthetic worlds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bandit import init_pilot
from .baselines import FixedArm, RandomPolicy
from .data import split_buckets
from .pretrain import PretrainHyperparams, train_arm_embeddings, train_projection
from .replay import (
    distribution_shift_replay,
    oracle_performance,
    oracle_spend,
    policy_bounds,
    run_deployment,
    run_learning,
    sweep_budget,
    tune_bin_size,
    tune_hyperparams,
)
from .synthetic import SyntheticWorld, shift_streams

ALPHA_GRID = (0.1, 0.25, 0.5, 1.0, 2.0)


@dataclass
class EndToEndResult:
    seed: int
    alpha: float
    oracle: float
    unconstrained: float
    oracle_spend: float
    rows: list[dict] = field(default_factory=list)

    def performance(self, policy: str) -> dict[float, float]:
        return {r["fraction"]: r["performance"] for r in self.rows if r["policy"] == policy}


def pretrain_world(world: SyntheticWorld, n_prefs: int, seed: int, d_m: int = 8):
    prefs = world.preferences(n_prefs, seed=seed)
    hp = PretrainHyperparams(seed=seed)
    proj = train_projection(prefs, d_m, hp)
    emb = train_arm_embeddings(prefs, proj, hp, n_arms=world.n_arms)
    return proj, emb


def synthetic_end_to_end(
    seed: int,
    n_records: int = 12_000,
    tuning_n: int = 1_000,
    budget_fractions: Sequence[float] = (0.3, 0.5, 0.75, 1.0),
    bin_size: int | None = None,
    bin_candidates: Sequence[int] = (1, 10, 100),
    n_prefs: int = 2_000,
    alpha_grid: Sequence[float] = ALPHA_GRID,
    world: SyntheticWorld | None = None,
) -> EndToEndResult:
    """Pretrain, tune alpha, learn on the 10:1 split and sweep budgets.

    Budgets are fractions of the spend of routing every deployment query to
    its best arm. PILOT is compared against Random and Fixed(cheapest). With
    ``bin_size=None`` the bin size for each budget is tuned on the tuning
    bucket over ``bin_candidates``; every policy then shares it.
    """
    world = SyntheticWorld(seed=seed) if world is None else world
    proj, emb = pretrain_world(world, n_prefs, seed)
    data = world.routing_dataset(n_records, seed=seed)
    tuning, learning, deployment = split_buckets(data, tuning_n, seed=seed)

    def factory(alpha):
        return init_pilot(emb, alpha, "inverse_accuracy", 1.0, proj)

    alpha, _ = tune_hyperparams(factory, tuning, proj, alpha_grid)
    tuner = factory(alpha)
    run_learning(tuner, tuning, proj)
    ub, lb = policy_bounds(tuner, tuning, proj)

    pilot = factory(alpha)
    run_learning(pilot, learning, proj)
    unconstrained = run_deployment(pilot, deployment, proj).deployment_performance
    spend = oracle_spend(deployment)
    policies = {
        "pilot": pilot,
        "random": RandomPolicy(world.n_arms, random_state=seed),
        "fixed_cheapest": FixedArm(world.n_arms, arm=world.cheapest_arm()),
    }
    rows = []
    for f in budget_fractions:
        budget = f * spend
        s = bin_size
        if s is None:
            s, _ = tune_bin_size(tuner, tuning, proj, budget / len(deployment), ub, lb, bin_candidates)
        for row in sweep_budget(policies, deployment, proj, [budget], ub, lb, bin_size=s):
            row.update(fraction=f, bin_size=s)
            rows.append(row)
    return EndToEndResult(seed, alpha, oracle_performance(deployment), unconstrained, spend, rows)


def synthetic_shift(
    seed: int,
    n_before: int = 5_000,
    n_after: int = 5_000,
    probe_window: int = 500,
    alpha: float = 1.0,
    n_prefs: int = 2_000,
    world: SyntheticWorld | None = None,
):
    """Best-arm-flip stream: clusters of the first half, then the other half."""
    world = SyntheticWorld(seed=seed) if world is None else world
    proj, emb = pretrain_world(world, n_prefs, seed)
    a, b = shift_streams(world, n_before, n_after, seed=seed)
    policy = init_pilot(emb, alpha, "inverse_accuracy", 1.0, proj)
    return distribution_shift_replay(policy, a, b, proj, probe_window)


def aggregate(values) -> tuple[float, float]:
    """Mean and standard error over seeds."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("nothing to aggregate")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se
