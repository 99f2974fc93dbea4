"""Time-windowed log-variance embeddings of spatially filtered epochs.

Each epoch becomes a ``[n_windows, n_filters]`` matrix whose entry ``[t, j]``
is ``ln(max(var(window t of filter j), eps))``.  The column-mean mask is a
display aid and lives in its own type so it cannot leak into metrics.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, ParseError

DEFAULT_EPS = 1e-12
DOMAIN_CODES = {"imagined": 0, "spoken": 1}
DOMAIN_NAMES = {v: k for k, v in DOMAIN_CODES.items()}
_RECORD_HEADER = struct.Struct("<IIB7x")


@dataclass(frozen=True)
class EmbeddingMatrix:
    values: np.ndarray  # [n_windows, n_filters]
    epoch_id: int
    label: int
    domain: str

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class MaskedEmbedding:
    """Display-only view: ``mask`` is True where a value was ignored.

    ``thresholds`` are the column means the mask was computed against.
    """

    source: EmbeddingMatrix
    mask: np.ndarray
    thresholds: np.ndarray

    def export(self):
        """Kept values shifted by the column minimum; ignored cells are exactly 0."""
        v = self.source.values
        # the column minimum is itself masked unless the column is constant
        return np.where(self.mask, 0.0, v - v.min(axis=0))


def window_length(n_samples, n_windows):
    if n_windows < 1:
        raise InvalidParameterError(f"n_windows must be positive, got {n_windows}")
    n = n_samples // n_windows
    if n < 2:
        raise InvalidParameterError(
            f"{n_samples} samples split into {n_windows} windows gives {n} samples per window; need >= 2"
        )
    return n


def log_variance(projected, n_windows=16, eps=DEFAULT_EPS):
    """``[n_epochs, n_windows, n_filters]`` array of floored log-variances."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    x = np.asarray(projected)
    n_ep, n_f, n_s = x.shape
    wl = window_length(n_s, n_windows)
    out = np.empty((n_ep, n_windows, n_f))
    # one epoch at a time keeps the double-precision temporaries small
    for k in range(n_ep):
        w = np.asarray(x[k, :, :wl * n_windows], dtype=float).reshape(n_f, n_windows, wl)
        out[k] = np.log(np.maximum(w.var(axis=-1), eps)).T
    return out


def embed(projected, n_windows=16, eps=DEFAULT_EPS, epoch_ids=None):
    """Embed every epoch of a projected :class:`EpochSet`."""
    values = log_variance(projected.epochs, n_windows, eps)
    if epoch_ids is None:
        epoch_ids = range(projected.n_epochs)
    return [
        EmbeddingMatrix(v, int(i), int(lab), str(dom))
        for v, i, lab, dom in zip(values, epoch_ids, projected.labels, projected.domain)
    ]


def column_mean_mask(m):
    """Mark entries strictly below their column mean.

    Given a :class:`MaskedEmbedding`, the stored column thresholds are
    re-applied to the kept entries only, so masking twice is the same as
    masking once.
    """
    if isinstance(m, MaskedEmbedding):
        mask = m.mask | (m.source.values < m.thresholds[None, :])
        return MaskedEmbedding(m.source, mask, m.thresholds)
    v = m.values
    thresholds = v.mean(axis=0)
    return MaskedEmbedding(m, v < thresholds[None, :], thresholds)


def stack(ms):
    """``[n, n_windows * n_filters]`` row-major flattening."""
    return np.stack([m.values.reshape(-1) for m in ms]) if ms else np.zeros((0, 0))


# ---------------------------------------------------------------- file format

def save_embeddings(ms, path):
    """Binary file: JSON header line, then per record a 16-byte header and f32le values."""
    ms = list(ms)
    if ms:
        n_windows, n_filters = ms[0].values.shape
        if any(m.values.shape != (n_windows, n_filters) for m in ms):
            raise InvalidParameterError("embeddings differ in shape")
    else:
        n_windows = n_filters = 0
    header = {"version": 1, "n_windows": int(n_windows), "n_filters": int(n_filters),
              "count": len(ms)}
    chunks = [json.dumps(header).encode("utf-8") + b"\n"]
    for m in ms:
        chunks.append(_RECORD_HEADER.pack(m.epoch_id, m.label, DOMAIN_CODES[m.domain]))
        chunks.append(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
    tmp = Path(str(path) + ".part")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_embeddings(path):
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ParseError("embedding header line is not terminated", offset=len(raw))
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
        n_windows, n_filters, count = (int(header[k]) for k in ("n_windows", "n_filters", "count"))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad embedding header: {exc}", offset=0) from None
    if header.get("version") != 1:
        raise ParseError(f"unsupported embedding version {header.get('version')}", offset=0)
    n_vals = n_windows * n_filters
    rec_size = _RECORD_HEADER.size + 4 * n_vals
    pos = nl + 1
    out = []
    for _ in range(count):
        if pos + rec_size > len(raw):
            raise ParseError(f"truncated record {len(out)} of {count}", offset=len(raw))
        epoch_id, label, dom = _RECORD_HEADER.unpack_from(raw, pos)
        if dom not in DOMAIN_NAMES:
            raise ParseError(f"unknown domain code {dom}", offset=pos + 8)
        vals = np.frombuffer(raw, dtype="<f4", count=n_vals, offset=pos + _RECORD_HEADER.size)
        out.append(EmbeddingMatrix(vals.reshape(n_windows, n_filters).copy(), epoch_id, label,
                                   DOMAIN_NAMES[dom]))
        pos += rec_size
    if pos != len(raw):
        raise ParseError(f"{len(raw) - pos} trailing bytes after {count} records", offset=pos)
    return out


def read_embedding_header(path):
    with open(path, "rb") as fh:
        line = fh.readline()
    try:
        return json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad embedding header: {exc}", offset=0) from None


def export_csv(ms, path):
    """One row per (epoch, window): ``epoch_id,label,domain,window,f0..``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n_f = ms[0].values.shape[1] if ms else 0
        w.writerow(["epoch_id", "label", "domain", "window"] + [f"f{j}" for j in range(n_f)])
        for m in ms:
            for t, row in enumerate(m.values):
                w.writerow([m.epoch_id, m.label, m.domain, t] + [repr(float(v)) for v in row])
