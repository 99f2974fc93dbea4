"""Exact O(n^2) t-SNE for diagnostic 2-D maps of embedding vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInputError, InvalidParameterError


@dataclass(frozen=True)
class TsneResult:
    points: np.ndarray
    kl_initial: float
    kl_final: float
    seed: int
    perplexity: float
    iterations: int
    learning_rate: float
    early_exaggeration: float
    exaggeration_iters: int


def _sq_distances(x):
    s = np.sum(x * x, axis=1)
    d = s[:, None] + s[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def conditional_probabilities(d2, perplexity, tol=1e-5, max_iter=50):
    """Row-wise Gaussian affinities with bandwidths matched to ``perplexity``."""
    n = d2.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d2[i], i)
        di = di - di.min()
        beta, lo, hi = 1.0, -np.inf, np.inf
        for _ in range(max_iter):
            w = np.exp(-di * beta)
            sw = w.sum()
            h = np.log(sw) + beta * np.sum(di * w) / sw
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        p[i, np.arange(n) != i] = w / sw
    return p


def joint_probabilities(x, perplexity):
    """Symmetrized affinities ``(P + P^T) / 2n``; entries sum to 1."""
    x = np.asarray(x, dtype=float)
    d2 = _sq_distances(x)
    if not np.any(d2 > 0):
        raise DegenerateInputError("all points are identical")
    p = conditional_probabilities(d2, perplexity)
    return (p + p.T) / (2.0 * x.shape[0])


def _student_t(y):
    num = 1.0 / (1.0 + _sq_distances(y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def _kl(p, q):
    m = p > 0
    return float(np.sum(p[m] * np.log(p[m] / np.maximum(q[m], 1e-300))))


def tsne(features, perplexity=30.0, iterations=1000, seed=0, learning_rate=200.0,
         early_exaggeration=12.0, exaggeration_iters=250, momentum=(0.5, 0.8),
         momentum_switch=250, init_scale=1e-4):
    """Embed ``features [n, d]`` in two dimensions.

    Gradient descent with momentum and per-coordinate adaptive gains; the
    affinities are exaggerated for the first ``exaggeration_iters`` steps.
    Deterministic for a given ``seed``.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise InvalidParameterError(f"features must be 2-D, got shape {x.shape}")
    n = x.shape[0]
    if n < 4:
        raise InvalidParameterError(f"need at least 4 points, got {n}")
    if not 0 < perplexity < (n - 1) / 3.0:
        raise InvalidParameterError(f"perplexity must be in (0, {(n - 1) / 3:.3f}) for n={n}")
    if iterations <= exaggeration_iters:
        raise InvalidParameterError(
            f"iterations ({iterations}) must exceed the exaggeration phase ({exaggeration_iters})"
        )

    p = joint_probabilities(x, perplexity)
    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, init_scale, size=(n, 2))
    kl_initial = _kl(p, _student_t(y)[1])

    update = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(iterations):
        pe = p * early_exaggeration if it < exaggeration_iters else p
        mom = momentum[0] if it < momentum_switch else momentum[1]
        num, q = _student_t(y)
        pq = (pe - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
        same = (grad > 0) == (update > 0)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = mom * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)

    kl_final = _kl(p, _student_t(y)[1])
    if not np.all(np.isfinite(y)):
        raise DegenerateInputError("t-SNE diverged to non-finite coordinates")
    return TsneResult(y, kl_initial, kl_final, int(seed), float(perplexity), int(iterations),
                      float(learning_rate), float(early_exaggeration), int(exaggeration_iters))
