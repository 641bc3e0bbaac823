"""OFUL and its prior-initialised variant on synthetic linear bandits.

Used to check empirically that starting the ridge estimate at a pretrained
vector ``theta_pref`` (``b_0 = lam * theta_pref``) and shrinking the
confidence radius to ``S' = ||theta* - theta_pref||`` lowers regret when the
prior is closer to ``theta*`` than the origin is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearBanditInstance:
    """Rewards ``theta_star @ x + N(0, noise_scale**2)``.

    Each round offers ``n_actions`` contexts drawn uniformly on the unit
    sphere, unless a fixed ``actions`` matrix is given.
    """

    theta_star: np.ndarray
    horizon: int = 2000
    n_actions: int = 10
    noise_scale: float = 0.1
    delta: float = 0.05
    lambda_reg: float = 1.0
    actions: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.theta_star)

    def context_stream(self, seed: int):
        rng = np.random.default_rng([seed, 0])
        for _ in range(self.horizon):
            if self.actions is not None:
                yield self.actions
            else:
                x = rng.standard_normal((self.n_actions, self.dim))
                yield x / np.linalg.norm(x, axis=1, keepdims=True)


@dataclass
class ConfidenceSet:
    center: np.ndarray
    A: np.ndarray
    radius: float
    S_param: float

    def contains(self, theta) -> bool:
        diff = np.asarray(theta) - self.center
        return float(np.sqrt(diff @ self.A @ diff)) <= self.radius

    def optimistic_value(self, x) -> float:
        """``max over theta in the set of theta @ x``."""
        x = np.asarray(x, dtype=float)
        return float(self.center @ x + self.radius * np.sqrt(x @ np.linalg.solve(self.A, x)))


def confidence_radius(S: float, inst: LinearBanditInstance, A: np.ndarray | None = None) -> float:
    """Radius ``sqrt(lam) S + R sqrt(2 log(1/delta) + log-det term)``.

    Without ``A`` the log-determinant is bounded by its horizon value
    ``d log(1 + T / (lam d))``; with ``A`` the data-dependent
    ``log det A - d log lam`` is used.
    """
    lam, d = inst.lambda_reg, inst.dim
    if A is None:
        logdet = d * math.log(1.0 + inst.horizon / (lam * d))
    else:
        logdet = float(np.linalg.slogdet(A)[1] - d * math.log(lam))
    return math.sqrt(lam) * S + inst.noise_scale * math.sqrt(2.0 * math.log(1.0 / inst.delta) + logdet)


def bound_value(S: float, inst: LinearBanditInstance, horizon: int | None = None) -> float:
    """High-probability regret bound ``U_T(S)``."""
    T = inst.horizon if horizon is None else horizon
    lam, d, R = inst.lambda_reg, inst.dim, inst.noise_scale
    if S < 0 or not 0 < inst.delta < 1 or lam <= 0:
        raise ValueError("need S >= 0, 0 < delta < 1, lambda > 0")
    lead = 4.0 * math.sqrt(T * d * math.log(lam + T / d))
    noise = R * math.sqrt(2.0 * math.log(1.0 / inst.delta) + d * math.log(1.0 + T / (lam * d)))
    return lead * (math.sqrt(lam) * S + noise)


def _run(inst: LinearBanditInstance, seed: int, theta_pref: np.ndarray, S: float, adaptive_radius: bool) -> np.ndarray:
    d, lam = inst.dim, inst.lambda_reg
    A = lam * np.eye(d)
    A_inv = np.eye(d) / lam
    b = lam * np.asarray(theta_pref, dtype=float)
    noise = np.random.default_rng([seed, 1])
    fixed_radius = confidence_radius(S, inst)
    regret = np.empty(inst.horizon)
    total = 0.0
    for t, X in enumerate(inst.context_stream(seed)):
        theta_hat = A_inv @ b
        width = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", X, A_inv, X), 0.0))
        radius = confidence_radius(S, inst, A) if adaptive_radius else fixed_radius
        i = int(np.argmax(X @ theta_hat + radius * width))
        x = X[i]
        expected = X @ inst.theta_star
        total += float(expected.max() - expected[i])
        regret[t] = total
        r = expected[i] + inst.noise_scale * noise.standard_normal()
        A += np.outer(x, x)
        u = A_inv @ x
        A_inv -= np.outer(u, u) / (1.0 + x @ u)
        b += r * x
    return regret


def run_oful(inst: LinearBanditInstance, seed: int = 0, S: float | None = None, adaptive_radius: bool = False) -> np.ndarray:
    """Cumulative pseudo-regret curve of OFUL.

    ``S`` defaults to the oracle value ``||theta*||``; pass another value to
    run with a misspecified norm bound.
    """
    S = float(np.linalg.norm(inst.theta_star)) if S is None else S
    return _run(inst, seed, np.zeros(inst.dim), S, adaptive_radius)


def run_pi_oful(
    inst: LinearBanditInstance,
    theta_pref,
    seed: int = 0,
    S: float | None = None,
    adaptive_radius: bool = False,
) -> np.ndarray:
    """OFUL started from ``theta_pref``; ``S`` defaults to ``||theta* - theta_pref||``."""
    theta_pref = np.asarray(theta_pref, dtype=float)
    S = float(np.linalg.norm(inst.theta_star - theta_pref)) if S is None else S
    return _run(inst, seed, theta_pref, S, adaptive_radius)


def make_instance(
    seed: int,
    dim: int = 8,
    n_actions: int = 10,
    noise_scale: float = 0.1,
    horizon: int = 2000,
    prior_ratio: float = 0.25,
    delta: float = 0.05,
    lambda_reg: float = 1.0,
) -> tuple[LinearBanditInstance, np.ndarray]:
    """Random unit ``theta*`` and a prior at distance ``prior_ratio * ||theta*||``."""
    rng = np.random.default_rng([seed, 2])
    theta = rng.standard_normal(dim)
    theta /= np.linalg.norm(theta)
    u = rng.standard_normal(dim)
    theta_pref = theta + prior_ratio * u / np.linalg.norm(u)
    inst = LinearBanditInstance(theta, horizon, n_actions, noise_scale, delta, lambda_reg)
    return inst, theta_pref


def compare_regret(seeds, **instance_kwargs) -> dict:
    """Seed-averaged OFUL vs PI-OFUL regret curves plus bound values."""
    oful, pi = [], []
    inst = None
    for seed in seeds:
        inst, theta_pref = make_instance(seed, **instance_kwargs)
        oful.append(run_oful(inst, seed))
        pi.append(run_pi_oful(inst, theta_pref, seed))
    oful, pi = np.array(oful), np.array(pi)
    n = len(oful)
    ratio = instance_kwargs.get("prior_ratio", 0.25)
    return {
        "t": np.arange(1, inst.horizon + 1),
        "oful_mean": oful.mean(axis=0),
        "oful_stderr": oful.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(inst.horizon),
        "pi_oful_mean": pi.mean(axis=0),
        "pi_oful_stderr": pi.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(inst.horizon),
        "final_diff_stderr": float((oful[:, -1] - pi[:, -1]).std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "bound_oful": bound_value(1.0, inst),
        "bound_pi_oful": bound_value(ratio, inst),
        "n_seeds": n,
    }
