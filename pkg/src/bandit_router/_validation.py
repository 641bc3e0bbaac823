"""Small input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

EPS_NORM = 1e-9
UNIT_TOL = 1e-6


def check_vector(x, length: int | None = None, name: str = "x") -> np.ndarray:
    # called per bandit step, so kept lighter than sklearn's check_array
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    if length is not None and x.shape[0] != length:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {length}")
    return x


def check_unit_vector(x, length: int | None = None, name: str = "psi") -> np.ndarray:
    x = check_vector(x, length, name)
    norm = np.linalg.norm(x)
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be unit-normalized (norm={norm:.6g})")
    return x


def check_reward(reward: float) -> float:
    reward = float(reward)
    if not (0.0 <= reward <= 1.0):
        raise ValueError(f"reward {reward!r} outside [0, 1]")
    return reward


def check_arm(arm: int, n_arms: int) -> int:
    arm = int(arm)
    if not 0 <= arm < n_arms:
        raise IndexError(f"arm {arm} out of range for {n_arms} arms")
    return arm


def normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms < EPS_NORM):
        raise ValueError("degenerate projection")
    return X / norms
