"""Synthetic routing worlds with known structure.

Queries come from latent clusters in embedding space. Each cluster has a
distinct best arm, beating the runner-up by ``margin``; arm costs are spread
geometrically between 1x and ``cost_spread``x a unit price. Every arm sees the
same multiset of cluster-mean scores, so no single arm dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ArmId, Dataset, PreferenceRecord, RoutingRecord, make_arms


@dataclass
class SyntheticWorld:
    n_arms: int = 4
    n_clusters: int = 4
    d_e: int = 16
    margin: float = 0.3
    best_score: float = 0.85
    score_noise: float = 0.05
    cost_spread: float = 10.0
    unit_cost: float = 1e-3
    cost_jitter: float = 0.1
    center_norm: float = 3.0
    spread: float = 0.5
    seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng([self.seed, 100])
        c = rng.standard_normal((self.n_clusters, self.d_e))
        self.centers = self.center_norm * c / np.linalg.norm(c, axis=1, keepdims=True)
        self.mean_scores = self._score_table()
        self.base_costs = self.unit_cost * np.geomspace(1.0, self.cost_spread, self.n_arms)
        self.arms: tuple[ArmId, ...] = make_arms([f"arm{a}" for a in range(self.n_arms)])

    def _score_table(self) -> np.ndarray:
        k = self.n_arms
        ladder = [self.best_score] + [
            max(self.best_score - self.margin - 0.1 * j, 0.05) for j in range(k - 1)
        ]
        table = np.empty((self.n_clusters, k))
        for c in range(self.n_clusters):
            for a in range(k):
                table[c, a] = ladder[(a - c) % k]
        return table

    def best_arm(self, cluster: int) -> int:
        return int(np.argmax(self.mean_scores[cluster]))

    def sample_queries(self, n: int, rng: np.random.Generator, clusters=None):
        pool = np.arange(self.n_clusters) if clusters is None else np.asarray(clusters)
        labels = pool[rng.integers(len(pool), size=n)]
        X = self.centers[labels] + self.spread * rng.standard_normal((n, self.d_e))
        return labels, X

    def routing_dataset(self, n: int, seed: int = 0, clusters=None, prefix: str = "q") -> Dataset:
        rng = np.random.default_rng([self.seed, seed, 1])
        labels, X = self.sample_queries(n, rng, clusters)
        scores = self.mean_scores[labels] + self.score_noise * rng.standard_normal((n, self.n_arms))
        scores = np.clip(scores, 0.0, 1.0)
        jitter = np.exp(self.cost_jitter * rng.standard_normal((n, self.n_arms)))
        costs = self.base_costs * jitter
        records = tuple(
            RoutingRecord(f"{prefix}{i}", X[i], scores[i], costs[i], f"cluster{labels[i]}")
            for i in range(n)
        )
        return Dataset(records=records, arms=self.arms, d_e=self.d_e, split_seed=seed)

    def preferences(self, n: int, seed: int = 0, temperature: float = 0.1, clusters=None) -> list[PreferenceRecord]:
        """Pairwise preferences with Bradley-Terry noise on the cluster means."""
        rng = np.random.default_rng([self.seed, seed, 2])
        labels, X = self.sample_queries(n, rng, clusters)
        prefs = []
        for i in range(n):
            a, b = rng.choice(self.n_arms, size=2, replace=False)
            gap = self.mean_scores[labels[i], a] - self.mean_scores[labels[i], b]
            a_wins = rng.uniform() < 1.0 / (1.0 + np.exp(-gap / temperature))
            winner = a if a_wins else b
            prefs.append(
                PreferenceRecord(f"p{i}", X[i], self.arms[a], self.arms[b], self.arms[winner])
            )
        return prefs

    def cheapest_arm(self) -> int:
        return int(np.argmin(self.base_costs))


def shift_streams(world: SyntheticWorld, n_before: int, n_after: int, seed: int = 0):
    """Two streams over disjoint cluster halves; their best arms differ."""
    half = world.n_clusters // 2
    first = list(range(half))
    second = list(range(half, world.n_clusters))
    a = world.routing_dataset(n_before, seed=seed, clusters=first, prefix="a")
    b = world.routing_dataset(n_after, seed=seed + 10_000, clusters=second, prefix="b")
    return a, b
