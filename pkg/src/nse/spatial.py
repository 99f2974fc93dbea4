"""Common spatial patterns: binary, one-vs-rest multi-class, projection.

Filters fitted on one domain (imagined speech by default) are meant to be
applied unchanged to the other; :func:`project` never refits.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    DecompositionError,
    InsufficientDataError,
    InvalidParameterError,
    ParseError,
    ShapeError,
)
from .signal_core import EpochSet

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class ClassCovariances:
    """Per-class mean of trace-normalized spatial covariances."""

    class_ids: np.ndarray
    covariances: np.ndarray  # [n_classes, n_channels, n_channels]
    counts: np.ndarray

    def __getitem__(self, class_id):
        i = int(np.flatnonzero(self.class_ids == class_id)[0])
        return self.covariances[i]

    @property
    def n_channels(self):
        return self.covariances.shape[-1]


@dataclass(frozen=True)
class SpatialFilterBank:
    filters: np.ndarray  # [n_filters, n_channels]
    source_class: np.ndarray
    eigenvalue: np.ndarray
    fitted_domain: str = "imagined"
    patterns_per_class: int = 0

    @property
    def n_filters(self):
        return self.filters.shape[0]

    @property
    def n_channels(self):
        return self.filters.shape[1]

    @property
    def class_ids(self):
        _, first = np.unique(self.source_class, return_index=True)
        return self.source_class[np.sort(first)]

    def block(self, class_id):
        return self.filters[self.source_class == class_id]

    def to_dict(self):
        return {
            "version": 1,
            "n_channels": int(self.n_channels),
            "class_ids": [int(c) for c in self.class_ids],
            "patterns_per_class": int(self.patterns_per_class),
            "fitted_domain": self.fitted_domain,
            "eigenvalues": self.eigenvalue.tolist(),
            "filters": self.filters.tolist(),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, d):
        try:
            filters = np.array(d["filters"], dtype=float).reshape(-1, int(d["n_channels"]))
            p = int(d["patterns_per_class"])
            class_ids = np.array(d["class_ids"], dtype=np.int64)
            if p * class_ids.size != filters.shape[0]:
                raise ValueError(f"{filters.shape[0]} filters for {class_ids.size} classes x {p}")
            return cls(filters, np.repeat(class_ids, p), np.array(d["eigenvalues"], dtype=float),
                       d.get("fitted_domain", "imagined"), p)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed filter bank: {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"filter bank is not JSON: {exc.msg}", exc.pos) from None
        return cls.from_dict(d)


def epoch_covariances(epochs):
    """Trace-normalized ``X X^T`` per epoch, ``[n_epochs, n_ch, n_ch]``."""
    x = np.asarray(epochs, dtype=float)
    c = x @ np.swapaxes(x, -1, -2)
    tr = np.trace(c, axis1=-2, axis2=-1)
    if np.any(tr <= 0):
        raise InsufficientDataError("epoch with zero power")
    return c / tr[:, None, None]


def class_covariances(epochs, ridge=DEFAULT_RIDGE):
    """Average normalized covariance per class, ridge-regularized, unit trace."""
    if ridge < 0:
        raise InvalidParameterError(f"ridge must be >= 0, got {ridge}")
    class_ids, counts = np.unique(epochs.labels, return_counts=True)
    thin = [int(c) for c, n in zip(class_ids, counts) if n < 2]
    if thin:
        raise InsufficientDataError(f"class(es) {thin} have fewer than 2 epochs")
    n_ch = epochs.n_channels
    covs = np.empty((class_ids.size, n_ch, n_ch))
    for i, c in enumerate(class_ids):
        mean = np.zeros((n_ch, n_ch))
        for x in epochs.epochs[epochs.labels == c]:
            mean += epoch_covariances(x[None])[0]
        mean /= counts[i]
        mean = 0.5 * (mean + mean.T)
        mean += ridge * np.trace(mean) / n_ch * np.eye(n_ch)
        covs[i] = mean / np.trace(mean)
    return ClassCovariances(class_ids, covs, counts)


def _fix_signs(w):
    # rows: largest-|entry| made positive
    idx = np.argmax(np.abs(w), axis=1)
    s = np.sign(w[np.arange(w.shape[0]), idx])
    s[s == 0] = 1.0
    return w * s[:, None]


def csp_binary(c1, c2, n_pairs, source_class=0):
    """Two-class CSP via ``C1 w = lambda (C1 + C2) w``.

    Returns the ``n_pairs`` filters with the largest eigenvalues (descending)
    followed by the ``n_pairs`` with the smallest (ascending), each scaled so
    ``w^T (C1 + C2) w = 1``.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    n = c1.shape[0]
    if c1.shape != (n, n) or c2.shape != (n, n):
        raise ShapeError(f"covariances must be square and equal-sized, got {c1.shape}, {c2.shape}")
    if not 1 <= n_pairs or 2 * n_pairs > n:
        raise InvalidParameterError(f"need 1 <= 2 * n_pairs <= {n}, got n_pairs={n_pairs}")
    composite = c1 + c2
    try:
        linalg.cholesky(composite, lower=True)
        evals, evecs = linalg.eigh(c1, composite)
    except linalg.LinAlgError as exc:
        raise DecompositionError(f"composite covariance is not positive definite: {exc}") from None
    # eigh returns ascending eigenvalues
    pick = np.concatenate([np.arange(n - 1, n - 1 - n_pairs, -1), np.arange(n_pairs)])
    w = _fix_signs(evecs[:, pick].T)
    lam = np.clip(evals[pick], 0.0, 1.0)
    return SpatialFilterBank(w, np.full(2 * n_pairs, source_class, dtype=np.int64), lam,
                             patterns_per_class=2 * n_pairs)


def csp_multiclass(covs, patterns_per_class=8, n_jobs=1):
    """One-vs-rest CSP; rest is the unweighted mean of the other classes."""
    k = covs.class_ids.size
    if k < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {k}")
    if patterns_per_class < 2 or patterns_per_class % 2:
        raise InvalidParameterError(f"patterns_per_class must be even and >= 2, got {patterns_per_class}")
    total = covs.covariances.sum(axis=0)

    def one(i):
        c = int(covs.class_ids[i])
        rest = (total - covs.covariances[i]) / (k - 1)
        try:
            return csp_binary(covs.covariances[i], rest, patterns_per_class // 2, source_class=c)
        except DecompositionError as exc:
            raise DecompositionError(f"class {c}: {exc}") from None

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(one, range(k)))
    else:
        blocks = [one(i) for i in range(k)]
    return SpatialFilterBank(
        np.concatenate([b.filters for b in blocks]),
        np.concatenate([b.source_class for b in blocks]),
        np.concatenate([b.eigenvalue for b in blocks]),
        patterns_per_class=patterns_per_class,
    )


def fit_bank(epochs, patterns_per_class=8, ridge=DEFAULT_RIDGE, n_jobs=1):
    """Class covariances plus one-vs-rest CSP on a single-domain epoch set."""
    domains = np.unique(epochs.domain)
    if domains.size != 1:
        raise InvalidParameterError(f"fit on a single domain, got {domains.tolist()}")
    bank = csp_multiclass(class_covariances(epochs, ridge), patterns_per_class, n_jobs)
    return SpatialFilterBank(bank.filters, bank.source_class, bank.eigenvalue,
                             str(domains[0]), bank.patterns_per_class)


def project(bank, epochs):
    """Apply the bank to every epoch; output channels are the filters.

    Single-precision epochs are projected in single precision, anything else
    in double.
    """
    if bank.n_channels != epochs.n_channels:
        raise ShapeError(f"bank expects {bank.n_channels} channels, epochs have {epochs.n_channels}")
    x = epochs.epochs
    dt = np.float32 if x.dtype == np.float32 else np.float64
    out = np.matmul(bank.filters.astype(dt)[None], np.asarray(x, dtype=dt))
    return epochs.with_epochs(out)
