"""Preference-prior informed LinUCB.

Each arm keeps a ridge-regression state ``(A, b)`` in the shared embedding
space, initialised from its preference embedding as ``A = lam * I`` and
``b = lam * theta_pref`` so that the point estimate starts at the prior.
The reward model is the cosine between the query and the arm estimate; arms
are chosen by ``cos(psi, A^-1 b) + alpha * sqrt(psi' A^-1 psi)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from ._validation import EPS_NORM, check_arm, check_reward, check_unit_vector
from .pretrain import ACCURACY_FLOOR, ArmEmbeddings, Projection


class DegenerateEstimateError(ValueError):
    pass


@dataclass
class ArmState:
    """Snapshot of one arm's ridge state."""

    A: np.ndarray
    A_inv: np.ndarray
    b: np.ndarray
    lam: float
    theta_prior: np.ndarray
    t_updates: int


def lambdas_from_accuracy(accuracy, floor: float = ACCURACY_FLOOR) -> np.ndarray:
    """Prior strength per arm: the reciprocal of clamped pretraining accuracy."""
    acc = np.clip(np.asarray(accuracy, dtype=float), floor, 1.0)
    return 1.0 / acc


def _unit_or_zero(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(norms < EPS_NORM, 0.0, v / np.where(norms < EPS_NORM, 1.0, norms))


class BasePolicy(BaseEstimator):
    """Shared select/update surface used by the replay harness.

    Policies only ever see projected contexts and the chosen arm's reward.
    """

    n_arms_: int

    def select(self, psi) -> int:
        raise NotImplementedError

    def update(self, arm: int, psi, reward: float) -> None:
        raise NotImplementedError

    def reward_estimates(self, psi) -> np.ndarray:
        raise NotImplementedError

    def reset(self):
        raise NotImplementedError

    def set_params(self, **params):
        super().set_params(**params)
        return self.reset()


class PilotRouter(BasePolicy):
    """LinUCB over the shared space with a preference prior per arm.

    Parameters
    ----------
    theta_prior : array of shape (n_arms, d_m)
        Prior arm embeddings. Non-zero rows are normalized to unit length.
    accuracy : array of shape (n_arms,), optional
        Pretraining accuracy per arm; required for
        ``lambda_rule="inverse_accuracy"``.
    alpha : float
        Exploration weight on the confidence width.
    lambda_rule : {"inverse_accuracy", "fixed"}
    lambda_value : float
        Prior strength used by the ``"fixed"`` rule.
    projection : Projection, optional
        When given, ``predict``/``decision_function``/``partial_fit`` accept raw
        embeddings and project them first.
    refresh_every : int
        Recompute each arm's inverse exactly after this many incremental
        updates.
    """

    def __init__(
        self,
        theta_prior=None,
        accuracy=None,
        alpha=1.0,
        lambda_rule="inverse_accuracy",
        lambda_value=1.0,
        projection=None,
        refresh_every=512,
    ):
        self.theta_prior = theta_prior
        self.accuracy = accuracy
        self.alpha = alpha
        self.lambda_rule = lambda_rule
        self.lambda_value = lambda_value
        self.projection = projection
        self.refresh_every = refresh_every
        self.reset()

    # -- state ------------------------------------------------------------

    def _prior(self):
        theta = np.atleast_2d(np.asarray(self.theta_prior, dtype=float))
        k = theta.shape[0]
        if self.lambda_rule == "inverse_accuracy":
            if self.accuracy is None:
                raise ValueError("inverse_accuracy rule needs per-arm accuracy")
            lam = lambdas_from_accuracy(self.accuracy)
        elif self.lambda_rule == "fixed":
            if self.lambda_value <= 0:
                raise ValueError("lambda_value must be positive")
            lam = np.full(k, float(self.lambda_value))
        else:
            raise ValueError(f"unknown lambda_rule {self.lambda_rule!r}")
        if lam.shape != (k,):
            raise ValueError("accuracy must have one entry per arm")
        return _unit_or_zero(theta), lam

    def reset(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.theta_prior is None:
            return self
        theta, lam = self._prior()
        k, d = theta.shape
        eye = np.eye(d)
        self.theta_prior_ = theta
        self.lambda_ = lam
        self.A_ = lam[:, None, None] * eye
        self.A_inv_ = (1.0 / lam)[:, None, None] * eye
        self.b_ = lam[:, None] * theta
        self.t_updates_ = np.zeros(k, dtype=int)
        self._since_refresh = np.zeros(k, dtype=int)
        self.n_arms_ = k
        self.n_features_ = d
        return self

    def arm_state(self, arm: int) -> ArmState:
        a = check_arm(arm, self.n_arms_)
        return ArmState(
            self.A_[a].copy(),
            self.A_inv_[a].copy(),
            self.b_[a].copy(),
            float(self.lambda_[a]),
            self.theta_prior_[a].copy(),
            int(self.t_updates_[a]),
        )

    # -- estimates ----------------------------------------------------------

    def point_estimate(self, arm: int) -> np.ndarray:
        a = check_arm(arm, self.n_arms_)
        return self.A_inv_[a] @ self.b_[a]

    def point_estimates(self) -> np.ndarray:
        return np.einsum("kij,kj->ki", self.A_inv_, self.b_)

    def posterior(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        a = check_arm(arm, self.n_arms_)
        return self.point_estimate(a), self.A_inv_[a].copy()

    def expected_reward(self, arm: int, psi) -> float:
        """Cosine between ``psi`` and the normalized point estimate of ``arm``."""
        psi = check_unit_vector(psi, self.n_features_)
        theta = self.point_estimate(arm)
        norm = np.linalg.norm(theta)
        if norm < EPS_NORM:
            raise DegenerateEstimateError("degenerate arm estimate")
        return float(psi @ theta / norm)

    def reward_estimates(self, psi) -> np.ndarray:
        """Cosine reward estimate for every arm; arms whose estimate is the
        zero vector score 0. A 2-D ``psi`` gives one row per context."""
        psi = np.asarray(psi, dtype=float)
        return psi @ _unit_or_zero(self.point_estimates()).T

    def widths(self, psi) -> np.ndarray:
        """Confidence widths ``sqrt(psi' A^-1 psi)`` per arm (without alpha)."""
        psi = np.asarray(psi, dtype=float)
        q = np.einsum("i,kij,j->k", psi, self.A_inv_, psi)
        return np.sqrt(np.maximum(q, 0.0))

    def ucb_scores(self, psi) -> np.ndarray:
        return self.reward_estimates(psi) + self.alpha * self.widths(psi)

    def exploration_width(self, arm: int, psi) -> float:
        return float(self.widths(psi)[arm])

    def select_arm(self, psi) -> tuple[int, np.ndarray]:
        """Arm with the largest UCB (lowest index on ties) and all scores."""
        psi = check_unit_vector(psi, self.n_features_)
        scores = self.ucb_scores(psi)
        return int(np.argmax(scores)), scores

    def select(self, psi) -> int:
        return self.select_arm(psi)[0]

    # -- learning -------------------------------------------------------------

    def update(self, arm: int, psi, reward: float) -> None:
        a = check_arm(arm, self.n_arms_)
        reward = check_reward(reward)
        x = check_unit_vector(psi, self.n_features_)
        self.A_[a] += np.outer(x, x)
        self.b_[a] += reward * x
        self.t_updates_[a] += 1
        self._since_refresh[a] += 1
        if self._since_refresh[a] >= self.refresh_every:
            inv = np.linalg.inv(self.A_[a])
            self.A_inv_[a] = 0.5 * (inv + inv.T)
            self._since_refresh[a] = 0
        else:
            u = self.A_inv_[a] @ x
            self.A_inv_[a] -= np.outer(u, u) / (1.0 + x @ u)

    def _contexts(self, X) -> np.ndarray:
        X = check_array(X)
        if self.projection is not None:
            return self.projection.project_many(X)
        return X

    def partial_fit(self, X, arms, rewards):
        """Apply a batch of bandit updates in order."""
        psi = self._contexts(X)
        arms = np.asarray(arms, dtype=int).ravel()
        rewards = np.asarray(rewards, dtype=float).ravel()
        if not (len(psi) == len(arms) == len(rewards)):
            raise ValueError("X, arms and rewards must have the same length")
        for x, a, r in zip(psi, arms, rewards):
            self.update(a, x, r)
        return self

    def fit(self, X, arms, rewards):
        self.reset()
        return self.partial_fit(X, arms, rewards)

    def decision_function(self, X) -> np.ndarray:
        """Greedy reward estimates, shape (n_samples, n_arms)."""
        psi = self._contexts(X)
        return psi @ _unit_or_zero(self.point_estimates()).T

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    # -- checkpoints ----------------------------------------------------------

    def to_checkpoint(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "arms": [
                {
                    "A": self.A_[a].tolist(),
                    "b": self.b_[a].tolist(),
                    "lambda": float(self.lambda_[a]),
                    "theta_prior": self.theta_prior_[a].tolist(),
                    "t_updates": int(self.t_updates_[a]),
                }
                for a in range(self.n_arms_)
            ],
        }

    def save_checkpoint(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_checkpoint()))

    @classmethod
    def from_checkpoint(cls, payload: dict, refresh_every: int = 512) -> "PilotRouter":
        arms = payload["arms"]
        theta = np.array([a["theta_prior"] for a in arms], dtype=float)
        lam = np.array([a["lambda"] for a in arms], dtype=float)
        router = cls(
            theta_prior=theta,
            alpha=payload["alpha"],
            lambda_rule="fixed",
            refresh_every=refresh_every,
        )
        # per-arm strengths come from the checkpoint, not the rule
        router.lambda_ = lam
        router.A_ = np.array([a["A"] for a in arms], dtype=float)
        router.b_ = np.array([a["b"] for a in arms], dtype=float)
        router.A_inv_ = np.linalg.inv(router.A_)
        router.t_updates_ = np.array([a["t_updates"] for a in arms], dtype=int)
        return router

    @classmethod
    def load_checkpoint(cls, path) -> "PilotRouter":
        return cls.from_checkpoint(json.loads(Path(path).read_text()))


def init_pilot(
    emb: ArmEmbeddings,
    alpha: float = 1.0,
    lambda_rule: str = "inverse_accuracy",
    lambda_value: float = 1.0,
    projection: Projection | None = None,
) -> PilotRouter:
    return PilotRouter(
        theta_prior=emb.theta_pref,
        accuracy=emb.accuracy,
        alpha=alpha,
        lambda_rule=lambda_rule,
        lambda_value=lambda_value,
        projection=projection,
    )
