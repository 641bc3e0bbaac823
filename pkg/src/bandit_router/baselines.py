"""Baseline routing policies sharing the ``select``/``update`` surface."""

from __future__ import annotations

import numpy as np

from ._validation import check_arm
from .bandit import BasePolicy, PilotRouter
from .pretrain import ArmEmbeddings, Projection


class LinUCBRouter(PilotRouter):
    """Disjoint LinUCB: the PILOT machinery with unit ridge and a zero prior."""

    def __init__(self, n_arms=2, n_features=8, alpha=1.0, projection=None, refresh_every=512):
        self.n_arms = n_arms
        self.n_features = n_features
        super().__init__(
            theta_prior=np.zeros((n_arms, n_features)),
            alpha=alpha,
            lambda_rule="fixed",
            lambda_value=1.0,
            projection=projection,
            refresh_every=refresh_every,
        )

    def _prior(self):
        return np.zeros((self.n_arms, self.n_features)), np.ones(self.n_arms)


def linucb_init(d_m: int, alpha: float, n_arms: int) -> LinUCBRouter:
    if d_m < 1:
        raise ValueError("d_m must be positive")
    return LinUCBRouter(n_arms=n_arms, n_features=d_m, alpha=alpha)


class EpochGreedy(BasePolicy):
    """Epochs of ``window`` steps: one uniform exploration step, then greedy.

    The exploration step is the first step of each epoch. Greedy steps use a
    zero-prior ridge estimator with ``alpha = 0``.
    """

    def __init__(self, n_arms=2, n_features=8, window=10, random_state=0):
        self.n_arms = n_arms
        self.n_features = n_features
        self.window = window
        self.random_state = random_state
        self.reset()

    def reset(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        self._rng = np.random.default_rng(self.random_state)
        self.estimator_ = LinUCBRouter(self.n_arms, self.n_features, alpha=0.0)
        self.n_arms_ = self.n_arms
        self.step_ = 0
        self.last_explored_ = False
        return self

    def select(self, psi) -> int:
        explore = self.step_ % self.window == 0
        self.step_ += 1
        self.last_explored_ = explore
        if explore:
            return int(self._rng.integers(self.n_arms))
        return int(np.argmax(self.estimator_.reward_estimates(psi)))

    def update(self, arm, psi, reward):
        self.estimator_.update(arm, psi, reward)

    def reward_estimates(self, psi):
        return self.estimator_.reward_estimates(psi)

    def exploration_width(self, arm, psi):
        return self.estimator_.exploration_width(arm, psi)


class ExploreOnly(BasePolicy):
    """Uniform random selection that still fits its ridge estimator, so the
    learned estimates can be deployed greedily afterwards."""

    def __init__(self, n_arms=2, n_features=8, random_state=0):
        self.n_arms = n_arms
        self.n_features = n_features
        self.random_state = random_state
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.random_state)
        self.estimator_ = LinUCBRouter(self.n_arms, self.n_features, alpha=0.0)
        self.n_arms_ = self.n_arms
        return self

    def select(self, psi) -> int:
        return int(self._rng.integers(self.n_arms))

    def update(self, arm, psi, reward):
        self.estimator_.update(arm, psi, reward)

    def reward_estimates(self, psi):
        return self.estimator_.reward_estimates(psi)

    def exploration_width(self, arm, psi):
        return self.estimator_.exploration_width(arm, psi)


class RandomPolicy(BasePolicy):
    """Uniform random routing. Ignores feedback; its deployment-time reward
    estimates are fresh uniform draws, so the cost policy ranks arms at random."""

    def __init__(self, n_arms=2, random_state=0):
        self.n_arms = n_arms
        self.random_state = random_state
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.random_state)
        self.n_arms_ = self.n_arms
        return self

    def select(self, psi) -> int:
        return int(self._rng.integers(self.n_arms))

    def update(self, arm, psi, reward):
        pass

    def reward_estimates(self, psi):
        psi = np.asarray(psi)
        return self._rng.uniform(size=psi.shape[:-1] + (self.n_arms,))


class FixedArm(BasePolicy):
    """All-to-one router."""

    def __init__(self, n_arms=2, arm=0):
        self.n_arms = n_arms
        self.arm = arm
        self.reset()

    def reset(self):
        check_arm(self.arm, self.n_arms)
        self.n_arms_ = self.n_arms
        return self

    def select(self, psi) -> int:
        return int(self.arm)

    def update(self, arm, psi, reward):
        pass

    def reward_estimates(self, psi):
        est = np.zeros(np.asarray(psi).shape[:-1] + (self.n_arms,))
        est[..., self.arm] = 1.0
        return est


POLICY_KINDS = ("pilot", "linucb", "epoch_greedy", "explore_only", "random", "fixed")


def make_policy(
    spec: dict,
    n_arms: int,
    d_m: int,
    embeddings: ArmEmbeddings | None = None,
    projection: Projection | None = None,
) -> BasePolicy:
    """Build a policy from a spec such as ``{"kind": "pilot", "alpha": 2.0}``."""
    kind = spec.get("kind", "pilot")
    seed = int(spec.get("seed", 0))
    if kind == "pilot":
        if embeddings is None:
            raise ValueError("pilot policy needs pretrained arm embeddings")
        lambda_rule = spec.get("lambda_rule", "inverse_accuracy")
        return PilotRouter(
            theta_prior=embeddings.theta_pref,
            accuracy=embeddings.accuracy,
            alpha=float(spec.get("alpha", 1.0)),
            lambda_rule=lambda_rule,
            lambda_value=float(spec.get("lambda_value", 1.0)),
            projection=projection,
        )
    if kind == "linucb":
        return LinUCBRouter(n_arms, d_m, alpha=float(spec.get("alpha", 1.0)), projection=projection)
    if kind == "epoch_greedy":
        return EpochGreedy(n_arms, d_m, window=int(spec.get("window", 10)), random_state=seed)
    if kind == "explore_only":
        return ExploreOnly(n_arms, d_m, random_state=seed)
    if kind == "random":
        return RandomPolicy(n_arms, random_state=seed)
    if kind == "fixed":
        return FixedArm(n_arms, arm=int(spec["arm"]))
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
