"""Preference pretraining of the shared query/arm embedding space.

Two phases, trained separately so neither chases the other:

1. a linear query projection ``psi(x) = W x + bias`` fitted with a cosine
   triplet loss, where positives are queries won by the same arm and hard
   negatives are queries on which that arm lost to a smaller model;
2. one embedding per arm, fitted with the projection frozen, using a binary
   cross-entropy loss on ``p_i = softmax(cos(theta_i, psi), cos(theta_j, psi))``.

Gradients are written out by hand (``triplet_loss_and_grad``,
``bce_loss_and_grad``) so they can be checked against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import EPS_NORM
from .data import ArmId, PreferenceRecord

ACCURACY_FLOOR = 0.05


class PretrainError(ValueError):
    pass


@dataclass
class PretrainHyperparams:
    learning_rate: float = 0.05
    epochs: int = 30
    margin: float = 0.2
    seed: int = 0


@dataclass
class Projection:
    W: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.W.ndim != 2 or self.bias.shape != (self.W.shape[0],):
            raise ValueError("W must be (d_m, d_e) and bias (d_m,)")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.bias))):
            raise ValueError("projection has non-finite entries")

    @property
    def d_m(self) -> int:
        return self.W.shape[0]

    @property
    def d_e(self) -> int:
        return self.W.shape[1]

    @classmethod
    def identity(cls, d: int) -> "Projection":
        return cls(np.eye(d), np.zeros(d))

    def raw(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.W.T + self.bias

    def project(self, x) -> np.ndarray:
        """Project one raw embedding and normalize it to unit length."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d_e,):
            raise ValueError(f"embedding has shape {x.shape}, expected ({self.d_e},)")
        v = self.W @ x + self.bias
        norm = np.linalg.norm(v)
        if norm < EPS_NORM:
            raise ValueError("degenerate projection")
        return v / norm

    def project_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d_e:
            raise ValueError(f"embeddings have shape {X.shape}, expected (n, {self.d_e})")
        V = self.raw(X)
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        if np.any(norms < EPS_NORM):
            raise ValueError("degenerate projection")
        return V / norms


def project(proj: Projection, x) -> np.ndarray:
    return proj.project(x)


@dataclass
class ArmEmbeddings:
    theta_pref: np.ndarray  # (k, d_m), rows unit-norm
    accuracy: np.ndarray  # (k,)

    @property
    def n_arms(self) -> int:
        return self.theta_pref.shape[0]


# ---------------------------------------------------------------------------
# losses and gradients


def _cos_grad(u: np.ndarray, v: np.ndarray):
    """cos(u, v) and its gradients with respect to u and v."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    c = float(u @ v) / (nu * nv)
    du = v / (nu * nv) - c * u / nu**2
    dv = u / (nu * nv) - c * v / nv**2
    return c, du, dv


def triplet_loss_and_grad(W, bias, x_anchor, x_pos, x_neg, margin):
    """Cosine-distance triplet hinge loss and its gradient w.r.t. ``(W, bias)``.

    ``loss = max(0, (1 - cos(a, p)) - (1 - cos(a, n)) + margin)`` on the
    projected vectors.
    """
    a = W @ x_anchor + bias
    p = W @ x_pos + bias
    n = W @ x_neg + bias
    c_ap, d_a1, d_p = _cos_grad(a, p)
    c_an, d_a2, d_n = _cos_grad(a, n)
    loss = c_an - c_ap + margin
    if loss <= 0.0:
        return 0.0, np.zeros_like(W), np.zeros_like(bias)
    # d loss / d (a, p, n)
    ga = d_a2 - d_a1
    gp = -d_p
    gn = d_n
    dW = np.outer(ga, x_anchor) + np.outer(gp, x_pos) + np.outer(gn, x_neg)
    db = ga + gp + gn
    return float(loss), dW, db


def preference_probability(theta_i, theta_j, psi) -> float:
    """Probability that arm i beats arm j on a query with projection ``psi``."""
    ci = _cos_grad(theta_i, psi)[0]
    cj = _cos_grad(theta_j, psi)[0]
    return float(1.0 / (1.0 + np.exp(cj - ci)))


def bce_loss_and_grad(theta_i, theta_j, W, bias, x, label):
    """BCE on the pairwise win probability; ``label`` is 1 when arm i won.

    Returns ``(loss, d_theta_i, d_theta_j, d_W, d_bias)``. Phase two only
    applies the theta gradients; the projection gradients exist so the
    frozen path can be checked too.
    """
    psi = W @ x + bias
    ci, dti, dpsi_i = _cos_grad(theta_i, psi)
    cj, dtj, dpsi_j = _cos_grad(theta_j, psi)
    delta = ci - cj
    # log-sigmoid form for numerical stability
    loss = float(np.logaddexp(0.0, -delta) if label else np.logaddexp(0.0, delta))
    p = 1.0 / (1.0 + np.exp(-delta))
    g = p - float(label)  # d loss / d delta
    dpsi = g * (dpsi_i - dpsi_j)
    return loss, g * dti, -g * dtj, np.outer(dpsi, x), dpsi


# ---------------------------------------------------------------------------
# pools


def _pairs_from_prefs(prefs: Sequence[PreferenceRecord]):
    X = np.vstack([p.embedding for p in prefs])
    pairs = np.array([[p.arm_i.index, p.arm_j.index, p.winner.index] for p in prefs], dtype=int)
    return X, pairs


def _ranks_from_prefs(prefs: Sequence[PreferenceRecord], n_arms: int) -> np.ndarray:
    ranks = np.full(n_arms, np.iinfo(np.int64).max, dtype=np.int64)
    for p in prefs:
        for arm in (p.arm_i, p.arm_j, p.winner):
            ranks[arm.index] = arm.size_rank
    return ranks


def _negative_pool(pairs: np.ndarray, size_rank: np.ndarray, arm: int) -> np.ndarray:
    participated = (pairs[:, 0] == arm) | (pairs[:, 1] == arm)
    winners = pairs[:, 2]
    lost_to_smaller = (winners != arm) & (size_rank[winners] < size_rank[arm])
    return np.flatnonzero(participated & lost_to_smaller)


def build_pools(anchor: PreferenceRecord, prefs: Sequence[PreferenceRecord]):
    """Positive and hard-negative pools for ``anchor``.

    Positives share the anchor's winner (the anchor itself excluded);
    negatives are preferences where the anchor's winner took part and lost
    to a strictly smaller model.
    """
    win = anchor.winner
    positives = [p for p in prefs if p is not anchor and p.winner.index == win.index]
    negatives = [
        p
        for p in prefs
        if win.index in (p.arm_i.index, p.arm_j.index)
        and p.winner.index != win.index
        and p.winner.size_rank < win.size_rank
    ]
    return positives, negatives


# ---------------------------------------------------------------------------
# training


def _init_projection(d_e: int, d_m: int, rng: np.random.Generator) -> Projection:
    bound = 1.0 / np.sqrt(d_e)
    return Projection(rng.uniform(-bound, bound, size=(d_m, d_e)), np.zeros(d_m))


def _fit_projection(X, pairs, size_rank, d_m, hp: PretrainHyperparams) -> Projection:
    if d_m < 2:
        raise ValueError("d_m must be at least 2")
    rng = np.random.default_rng([hp.seed, 1])
    proj = _init_projection(X.shape[1], d_m, rng)
    winners = pairs[:, 2]
    n_arms = len(size_rank)
    positives = {a: np.flatnonzero(winners == a) for a in range(n_arms)}
    negatives = {a: _negative_pool(pairs, size_rank, a) for a in range(n_arms)}
    usable = np.array(
        [
            i
            for i in range(len(pairs))
            if len(positives[winners[i]]) > 1 and len(negatives[winners[i]]) > 0
        ],
        dtype=int,
    )
    if usable.size == 0:
        raise PretrainError("no usable triplets")

    W, bias = proj.W.copy(), proj.bias.copy()
    lr = hp.learning_rate
    for _ in range(hp.epochs):
        for i in rng.permutation(usable):
            pool = positives[winners[i]]
            # sample a positive other than the anchor itself
            j = pool[rng.integers(len(pool) - 1)]
            if j == i:
                j = pool[-1]
            neg = negatives[winners[i]]
            n = neg[rng.integers(len(neg))]
            if lr == 0.0:
                continue
            if min(
                np.linalg.norm(W @ X[k] + bias) for k in (i, j, n)
            ) < EPS_NORM:
                continue
            _, dW, db = triplet_loss_and_grad(W, bias, X[i], X[j], X[n], hp.margin)
            W -= lr * dW
            bias -= lr * db
    return Projection(W, bias)


def mean_triplet_loss(proj: Projection, X, pairs, size_rank, margin, n_samples=500, seed=0) -> float:
    """Mean triplet loss over a fixed random sample of (anchor, pos, neg)."""
    rng = np.random.default_rng(seed)
    winners = pairs[:, 2]
    losses = []
    candidates = [
        (i, np.setdiff1d(np.flatnonzero(winners == winners[i]), [i]),
         _negative_pool(pairs, size_rank, winners[i]))
        for i in range(len(pairs))
    ]
    candidates = [c for c in candidates if len(c[1]) and len(c[2])]
    if not candidates:
        raise PretrainError("no usable triplets")
    for _ in range(n_samples):
        i, pos, neg = candidates[rng.integers(len(candidates))]
        p, n = pos[rng.integers(len(pos))], neg[rng.integers(len(neg))]
        losses.append(triplet_loss_and_grad(proj.W, proj.bias, X[i], X[p], X[n], margin)[0])
    return float(np.mean(losses))


def _unit_sphere(rng: np.random.Generator, k: int, d: int) -> np.ndarray:
    v = rng.standard_normal((k, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _fit_arm_embeddings(X, pairs, n_arms, proj: Projection, hp: PretrainHyperparams) -> ArmEmbeddings:
    rng = np.random.default_rng([hp.seed, 2])
    theta = _unit_sphere(rng, n_arms, proj.d_m)
    W, bias = proj.W, proj.bias
    lr = hp.learning_rate
    for _ in range(hp.epochs):
        for r in rng.permutation(len(pairs)):
            ai, aj, w = pairs[r]
            if lr == 0.0:
                continue
            _, gi, gj, _, _ = bce_loss_and_grad(theta[ai], theta[aj], W, bias, X[r], w == ai)
            theta[ai] -= lr * gi
            theta[aj] -= lr * gj

    psi = proj.project_many(X)
    theta = theta / np.linalg.norm(theta, axis=1, keepdims=True)
    cos = psi @ theta.T
    correct = np.zeros(n_arms)
    seen = np.zeros(n_arms)
    for r, (ai, aj, w) in enumerate(pairs):
        margin = np.sign(cos[r, ai] - cos[r, aj])
        label = 1.0 if w == ai else -1.0
        ok = float(margin == label)
        correct[ai] += ok
        correct[aj] += ok
        seen[ai] += 1
        seen[aj] += 1

    accuracy = np.full(n_arms, ACCURACY_FLOOR)
    has = seen > 0
    accuracy[has] = correct[has] / seen[has]
    if np.any(~has):
        fallback = psi.mean(axis=0)
        fallback /= np.linalg.norm(fallback)
        theta[~has] = fallback
    return ArmEmbeddings(theta_pref=theta, accuracy=accuracy)


def train_projection(prefs: Sequence[PreferenceRecord], d_m: int, hp: PretrainHyperparams | None = None) -> Projection:
    hp = hp or PretrainHyperparams()
    if len(prefs) < 2:
        raise PretrainError("need at least two preferences")
    X, pairs = _pairs_from_prefs(prefs)
    n_arms = int(pairs.max()) + 1
    return _fit_projection(X, pairs, _ranks_from_prefs(prefs, n_arms), d_m, hp)


def train_arm_embeddings(
    prefs: Sequence[PreferenceRecord],
    proj: Projection,
    hp: PretrainHyperparams | None = None,
    n_arms: int | None = None,
) -> ArmEmbeddings:
    hp = hp or PretrainHyperparams()
    X, pairs = _pairs_from_prefs(prefs)
    n_arms = n_arms or int(pairs.max()) + 1
    return _fit_arm_embeddings(X, pairs, n_arms, proj, hp)


class PreferenceEmbedder(TransformerMixin, BaseEstimator):
    """Learn the shared embedding space from pairwise preferences.

    ``fit(X, y)`` takes raw query embeddings ``X`` of shape ``(n, d_e)`` and
    ``y`` of shape ``(n, 3)`` holding ``(arm_i, arm_j, winner)`` indices.
    ``transform`` returns unit-normalized projected queries.

    Parameters
    ----------
    n_components : int
        Dimension ``d_m`` of the shared space.
    size_rank : array-like of int, optional
        Model-size rank per arm, used for hard-negative mining. Defaults to
        the arm index.
    learning_rate, epochs, margin : SGD and triplet-loss settings.
    random_state : int
    """

    def __init__(self, n_components=8, size_rank=None, learning_rate=0.05, epochs=30, margin=0.2, random_state=0):
        self.n_components = n_components
        self.size_rank = size_rank
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.margin = margin
        self.random_state = random_state

    def _hp(self) -> PretrainHyperparams:
        return PretrainHyperparams(self.learning_rate, self.epochs, self.margin, self.random_state)

    def fit(self, X, y):
        X = check_array(X)
        pairs = check_array(y, dtype=int)
        if pairs.shape != (X.shape[0], 3):
            raise ValueError("y must have shape (n_samples, 3): arm_i, arm_j, winner")
        if np.any(pairs[:, 0] == pairs[:, 1]) or np.any(
            (pairs[:, 2] != pairs[:, 0]) & (pairs[:, 2] != pairs[:, 1])
        ):
            raise ValueError("each row needs arm_i != arm_j and winner in {arm_i, arm_j}")
        if self.size_rank is None:
            ranks = np.arange(int(pairs.max()) + 1)
        else:
            ranks = np.asarray(self.size_rank, dtype=np.int64)
        self.n_features_in_ = X.shape[1]
        self.projection_ = _fit_projection(X, pairs, ranks, self.n_components, self._hp())
        self.arm_embeddings_ = _fit_arm_embeddings(X, pairs, len(ranks), self.projection_, self._hp())
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        return self.projection_.project_many(check_array(X))


# ---------------------------------------------------------------------------
# model artifact


def save_model(path, proj: Projection, emb: ArmEmbeddings, arms: Sequence[ArmId] | None = None) -> None:
    payload = {
        "d_m": proj.d_m,
        "W": proj.W.tolist(),
        "bias": proj.bias.tolist(),
        "theta_pref": emb.theta_pref.tolist(),
        "accuracy": emb.accuracy.tolist(),
        "arms": [a.to_manifest() for a in arms] if arms else [],
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path) -> tuple[Projection, ArmEmbeddings, list[dict]]:
    raw = json.loads(Path(path).read_text())
    proj = Projection(np.array(raw["W"]), np.array(raw["bias"]))
    if proj.d_m != raw["d_m"]:
        raise ValueError("model artifact: d_m disagrees with W")
    emb = ArmEmbeddings(np.array(raw["theta_pref"], dtype=float), np.array(raw["accuracy"], dtype=float))
    return proj, emb, raw.get("arms", [])
