"""FastICA with symmetric decorrelation and reference-guided artifact removal."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConvergenceError, InvalidParameterError, ParseError, RankError
from .signal_core import EpochSet, Recording

log = logging.getLogger(__name__)

MAX_ITER = 500
TOL = 1e-6


@dataclass(frozen=True)
class IcaModel:
    """Fitted decomposition.

    Component activations are ``unmixing @ whitening @ (x - channel_means)``;
    channels are rebuilt as ``mixing_pseudo_inverse @ activations + channel_means``.
    """

    whitening: np.ndarray
    unmixing: np.ndarray
    mixing_pseudo_inverse: np.ndarray
    channel_means: np.ndarray

    @property
    def k(self):
        return self.unmixing.shape[0]

    def transform(self, x):
        x = np.asarray(x, dtype=float)
        return self.unmixing @ (self.whitening @ (x - self.channel_means[:, None]))

    def inverse_transform(self, sources):
        return self.mixing_pseudo_inverse @ sources + self.channel_means[:, None]

    def to_json(self):
        return json.dumps({
            "version": 1,
            "whitening": self.whitening.tolist(),
            "unmixing": self.unmixing.tolist(),
            "mixing_pseudo_inverse": self.mixing_pseudo_inverse.tolist(),
            "channel_means": self.channel_means.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
            return cls(*(np.array(d[key], dtype=float) for key in
                         ("whitening", "unmixing", "mixing_pseudo_inverse", "channel_means")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed ICA model: {exc}") from None


def _as_matrix(data):
    if isinstance(data, EpochSet):
        return np.concatenate(list(data.epochs), axis=1).astype(float)
    if isinstance(data, Recording):
        return np.asarray(data.samples, dtype=float)
    return np.asarray(data, dtype=float)


def _sym_decorrelate(w):
    # W <- (W W^T)^{-1/2} W
    s, u = np.linalg.eigh(w @ w.T)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def _fix_signs(vectors):
    # rows: largest-magnitude entry made positive
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_ica(data, k=None, seed=0, max_iter=MAX_ITER, tol=TOL):
    """Fit FastICA (symmetric, ``g = tanh``).

    Parameters
    ----------
    data : EpochSet, Recording or array ``[n_channels, n_samples]``
        Epochs are concatenated along time.
    k : int, optional
        Number of components, default ``n_channels``.  Reduced (with a
        warning) when the covariance has eigenvalues below ``1e-10 * trace``.
    seed : int
        Seeds the initial unmixing matrix.

    Returns
    -------
    IcaModel
        Components ordered by descending explained variance.
    """
    x = _as_matrix(data)
    n_ch, n = x.shape
    if k is None:
        k = n_ch
    if not 1 <= k <= n_ch:
        raise InvalidParameterError(f"k must be in [1, {n_ch}], got {k}")
    if n < 10 * n_ch:
        raise InvalidParameterError(f"need at least {10 * n_ch} samples, got {n}")

    means = x.mean(axis=1)
    xc = x - means[:, None]
    cov = xc @ xc.T / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evecs = _fix_signs(evecs.T).T
    keep = evals > 1e-10 * evals.sum()
    if not np.any(keep):
        raise RankError("covariance is numerically zero")
    rank = int(keep.sum())
    if rank < k:
        log.warning("covariance rank %d < requested k=%d; reducing k", rank, k)
        k = rank
    d, e = evals[:k], evecs[:, :k]
    whitening = (e / np.sqrt(d)).T
    dewhitening = e * np.sqrt(d)
    z = whitening @ xc

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((k, k)))
    delta = np.inf
    for _ in range(max_iter):
        u = w @ z
        g = np.tanh(u)
        g_prime = 1.0 - g * g
        w_new = _sym_decorrelate(g @ z.T / n - g_prime.mean(axis=1)[:, None] * w)
        delta = np.max(np.abs(1.0 - np.abs(np.sum(w_new * w, axis=1))))
        w = w_new
        if delta < tol:
            break
    else:
        raise ConvergenceError(f"FastICA did not converge in {max_iter} iterations", delta)

    mixing = dewhitening @ w.T
    explained = np.sum(mixing ** 2, axis=0)
    order = np.argsort(-explained, kind="stable")
    w = w[order]
    # sign: largest-magnitude entry of each mixing column positive
    mixing = mixing[:, order]
    idx = np.argmax(np.abs(mixing), axis=0)
    signs = np.sign(mixing[idx, np.arange(k)])
    signs[signs == 0] = 1.0
    w = w * signs[:, None]
    mixing = mixing * signs[None, :]
    return IcaModel(whitening, w, mixing, means)


def _max_abs_corr(sources, refs):
    """``[k]`` max over reference channels of |Pearson r|; zero-variance rows give 0."""
    def standardize(a):
        a = a - a.mean(axis=1, keepdims=True)
        norm = np.sqrt(np.sum(a * a, axis=1, keepdims=True))
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(norm > 0, a / np.where(norm > 0, norm, 1.0), 0.0)
        return out

    r = standardize(sources) @ standardize(refs).T
    return np.clip(np.abs(r), 0.0, 1.0).max(axis=1)


def artifact_components(model, data, references, threshold=0.8):
    """Indices of components whose activation correlates with a reference above ``threshold``."""
    sources = model.transform(data.samples)
    corr = _max_abs_corr(sources, np.asarray(references.samples, dtype=float))
    return np.flatnonzero(corr > threshold), corr


def reject_components(model, data, references, threshold=0.8):
    """Zero reference-correlated components and rebuild the channels.

    Parameters
    ----------
    references : Recording
        EOG/EMG channels, time-aligned with ``data``.
    threshold : float
        Components with max |r| strictly above this are removed; in (0, 1].
    """
    if not 0 < threshold <= 1:
        raise InvalidParameterError(f"threshold must be in (0, 1], got {threshold}")
    if references.sample_rate_hz != data.sample_rate_hz or references.n_samples != data.n_samples:
        raise AlignmentError(
            f"references ({references.n_samples} @ {references.sample_rate_hz} Hz) are not aligned "
            f"with data ({data.n_samples} @ {data.sample_rate_hz} Hz)"
        )
    if data.n_channels != model.channel_means.size:
        raise AlignmentError("data channel count does not match the model")
    sources = model.transform(data.samples)
    rejected, _ = artifact_components(model, data, references, threshold)
    if rejected.size:
        log.info("rejecting components %s", rejected.tolist())
    sources[rejected] = 0.0
    return data.with_samples(model.inverse_transform(sources))
