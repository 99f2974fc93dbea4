"""Continuous recordings, IIR filter design, zero-phase filtering and epoching.

Filters are designed as cascades of second-order sections (biquads).  The
bandpass design follows the classical route: analog Butterworth lowpass
prototype, lowpass-to-bandpass transform at prewarped edges, bilinear
transform.  Application is forward-backward so the applied magnitude is
``|H|**2`` and the phase is zero.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .errors import (
    DesignFailureError,
    InvalidParameterError,
    LengthError,
    OutOfRangeError,
    ParseError,
    ShapeError,
)

DOMAINS = ("imagined", "spoken")


@dataclass(frozen=True)
class Recording:
    """Continuous multichannel signal, channel-major ``[n_channels, n_samples]``."""

    sample_rate_hz: float
    channel_names: tuple
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 2:
            raise ShapeError(f"samples must be 2-D, got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if not self.sample_rate_hz > 0:
            raise InvalidParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if samples.shape[0] != len(self.channel_names):
            raise ShapeError(
                f"{samples.shape[0]} sample rows but {len(self.channel_names)} channel names"
            )
        if samples.shape[1] == 0:
            raise LengthError("recording has no samples")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("recording contains non-finite samples")

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    def with_samples(self, samples):
        return Recording(self.sample_rate_hz, self.channel_names, samples)


@dataclass(frozen=True)
class EventList:
    """Trial onsets (sample indices) with their class labels."""

    onsets: np.ndarray
    labels: np.ndarray
    vocabulary_size: int = 13

    def __post_init__(self):
        onsets = np.asarray(self.onsets, dtype=np.int64).reshape(-1)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if onsets.shape != labels.shape:
            raise ShapeError("onsets and labels differ in length")
        if onsets.size and np.any(np.diff(onsets) <= 0):
            raise InvalidParameterError("event onsets must be strictly increasing")
        if onsets.size and onsets[0] < 0:
            raise OutOfRangeError("negative event onset", [(int(onsets[0]), int(labels[0]))])
        if labels.size and (labels.min() < 0 or labels.max() >= self.vocabulary_size):
            raise InvalidParameterError(
                f"labels must lie in [0, {self.vocabulary_size}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "onsets", onsets)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.onsets.size

    def __iter__(self):
        return zip(self.onsets.tolist(), self.labels.tolist())


@dataclass(frozen=True)
class EpochSet:
    """Stack of equal-length trials ``[n_epochs, n_channels, n_samples]``."""

    epochs: np.ndarray
    labels: np.ndarray
    domain: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        epochs = np.asarray(self.epochs)
        if epochs.ndim != 3:
            raise ShapeError(f"epochs must be 3-D, got shape {epochs.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        domain = np.asarray(self.domain, dtype="<U8").reshape(-1)
        if domain.size == 1 and epochs.shape[0] != 1:
            domain = np.repeat(domain, epochs.shape[0])
        if labels.size != epochs.shape[0] or domain.size != epochs.shape[0]:
            raise ShapeError(
                f"{epochs.shape[0]} epochs but {labels.size} labels and {domain.size} domain tags"
            )
        bad = set(domain.tolist()) - set(DOMAINS)
        if bad:
            raise InvalidParameterError(f"unknown domain tag(s) {sorted(bad)}")
        if not self.sample_rate_hz > 0:
            raise InvalidParameterError("sample_rate_hz must be positive")
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "domain", domain)

    @property
    def n_epochs(self):
        return self.epochs.shape[0]

    @property
    def n_channels(self):
        return self.epochs.shape[1]

    @property
    def n_samples(self):
        return self.epochs.shape[2]

    def select(self, mask):
        mask = np.asarray(mask)
        return EpochSet(self.epochs[mask], self.labels[mask], self.domain[mask], self.sample_rate_hz)

    def with_epochs(self, epochs):
        return EpochSet(epochs, self.labels, self.domain, self.sample_rate_hz)

    @staticmethod
    def concatenate(sets: Sequence["EpochSet"]) -> "EpochSet":
        if not sets:
            raise InvalidParameterError("nothing to concatenate")
        fs = sets[0].sample_rate_hz
        if any(s.sample_rate_hz != fs for s in sets):
            raise InvalidParameterError("sample rates differ")
        return EpochSet(
            np.concatenate([s.epochs for s in sets]),
            np.concatenate([s.labels for s in sets]),
            np.concatenate([s.domain for s in sets]),
            fs,
        )


@dataclass(frozen=True)
class SosFilter:
    """Cascade of biquads; each row is ``(b0, b1, b2, a1, a2)`` with ``a0 = 1``."""

    sections: np.ndarray
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        sections = np.asarray(self.sections, dtype=float).reshape(-1, 5)
        if not np.all(np.isfinite(sections)):
            raise DesignFailureError("filter has non-finite coefficients")
        object.__setattr__(self, "sections", sections)

    @property
    def n_sections(self):
        return self.sections.shape[0]

    @property
    def order(self):
        return 2 * self.n_sections

    def sos(self):
        """Coefficients in the 6-column ``[b0 b1 b2 1 a1 a2]`` layout."""
        s = self.sections
        return np.column_stack([s[:, :3], np.ones(len(s)), s[:, 3:]])

    def poles(self):
        return np.concatenate([np.roots([1.0, a1, a2]) for a1, a2 in self.sections[:, 3:]])

    def is_stable(self):
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz, fs_hz):
        """Complex response at ``freqs_hz`` by direct evaluation of each section."""
        z = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / fs_hz)
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.sections:
            h = h * (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
        return h


def _check_stable(sections, description):
    filt = SosFilter(sections, description)
    if not filt.is_stable():
        raise DesignFailureError(
            f"designed filter is unstable (max pole radius {np.abs(filt.poles()).max():.12f})"
        )
    return filt


def design_bandpass(order, low_hz, high_hz, fs_hz):
    """Butterworth bandpass as a cascade of ``order`` biquads.

    Parameters
    ----------
    order : int
        Analog prototype order (1..12).  The digital filter has order ``2 * order``.
    low_hz, high_hz : float
        -3 dB edges; exact after prewarping.
    fs_hz : float
        Sampling rate.
    """
    nyq = fs_hz / 2.0
    if not 1 <= int(order) <= 12 or int(order) != order:
        raise InvalidParameterError(f"order must be an integer in [1, 12], got {order}")
    if not low_hz > 0:
        raise InvalidParameterError(f"low edge must be positive, got {low_hz} Hz")
    if low_hz >= nyq:
        raise InvalidParameterError(f"low edge {low_hz} Hz is at or above Nyquist ({nyq} Hz)")
    if high_hz >= nyq:
        raise InvalidParameterError(f"high edge {high_hz} Hz is at or above Nyquist ({nyq} Hz)")
    if not low_hz < high_hz:
        raise InvalidParameterError(f"low edge {low_hz} Hz must be below high edge {high_hz} Hz")
    order = int(order)

    k = 2.0 * fs_hz
    w_lo = k * np.tan(np.pi * low_hz / fs_hz)
    w_hi = k * np.tan(np.pi * high_hz / fs_hz)
    bw = w_hi - w_lo
    w0 = np.sqrt(w_lo * w_hi)

    m = np.arange(1, order + 1)
    proto = np.exp(1j * np.pi * (2 * m + order - 1) / (2 * order))

    # each prototype pole p maps to the roots of s^2 - p*bw*s + w0^2
    analog = []
    for p in proto:
        pb = p * bw
        disc = np.sqrt(pb * pb - 4.0 * w0 * w0 + 0j)
        analog.extend([(pb + disc) / 2.0, (pb - disc) / 2.0])
    analog = np.asarray(analog)
    digital = (k + analog) / (k - analog)

    sections = []
    for pair in _pair_poles(digital):
        a = np.real(np.poly(pair))
        sections.append([1.0, 0.0, -1.0, a[1], a[2]])
    sections = np.asarray(sections)

    # unit gain at the digital image of the analog centre frequency
    center = 2.0 * np.arctan(w0 / k) * fs_hz / (2 * np.pi)
    g = abs(SosFilter(sections).response([center], fs_hz)[0])
    sections[:, :3] *= g ** (-1.0 / order)

    desc = {"type": "butterworth_bandpass", "order": order, "low_hz": float(low_hz),
            "high_hz": float(high_hz), "fs_hz": float(fs_hz)}
    return _check_stable(sections, desc)


def _pair_poles(poles):
    """Group poles into conjugate pairs (real poles paired together)."""
    poles = np.asarray(poles)
    tol = 1e-10 * max(1.0, np.abs(poles).max())
    upper = [p for p in poles if p.imag > tol]
    real = sorted(p.real for p in poles if abs(p.imag) <= tol)
    pairs = [(p, np.conj(p)) for p in sorted(upper, key=lambda p: (abs(p), np.angle(p)))]
    if len(real) % 2:
        raise DesignFailureError("odd number of real poles in a bandpass design")
    pairs += [(real[i], real[i + 1]) for i in range(0, len(real), 2)]
    return pairs


def design_notch(center_hz, q, fs_hz):
    """Second-order notch with unit gain at DC and Nyquist and a null at ``center_hz``."""
    nyq = fs_hz / 2.0
    if not 0 < center_hz < nyq:
        raise InvalidParameterError(f"notch centre {center_hz} Hz must lie in (0, {nyq}) Hz")
    if not q > 0:
        raise InvalidParameterError(f"q must be positive, got {q}")
    w = 2 * np.pi * center_hz / fs_hz
    alpha = np.sin(w) / (2.0 * q)
    a0 = 1.0 + alpha
    c = -2.0 * np.cos(w)
    sections = np.array([[1.0 / a0, c / a0, 1.0 / a0, c / a0, (1.0 - alpha) / a0]])
    desc = {"type": "notch", "center_hz": float(center_hz), "q": float(q), "fs_hz": float(fs_hz)}
    return _check_stable(sections, desc)


def cascade(*filters):
    """Concatenate filters into one cascade."""
    desc = {"type": "cascade", "parts": [f.description for f in filters]}
    return SosFilter(np.concatenate([f.sections for f in filters]), desc)


def filtfilt_array(filt, x, axis=-1):
    """Forward-backward filtering of an array along ``axis``.

    The signal is extended at both ends by odd reflection of length
    ``3 * filt.order``; initial conditions are the steady state for the edge
    value so constant input produces no transient.
    """
    x = np.asarray(x, dtype=float)
    pad = 3 * filt.order
    n = x.shape[axis]
    if n <= pad:
        raise LengthError(f"signal of {n} samples is too short for edge padding of {pad} samples")
    x = np.moveaxis(x, axis, -1)
    sos = filt.sos()
    left = 2 * x[..., :1] - x[..., pad:0:-1]
    right = 2 * x[..., -1:] - x[..., -2:-pad - 2:-1]
    ext = np.concatenate([left, x, right], axis=-1)

    zi = sps.sosfilt_zi(sos)
    y, _ = sps.sosfilt(sos, ext, axis=-1, zi=_zi_for(zi, ext[..., 0]))
    y = y[..., ::-1]
    y, _ = sps.sosfilt(sos, y, axis=-1, zi=_zi_for(zi, y[..., 0]))
    y = y[..., ::-1][..., pad:pad + n]
    return np.moveaxis(y, -1, axis)


def _zi_for(zi, x0):
    # sosfilt wants zi shaped (n_sections, ..., 2) for a signal filtered along the last axis
    x0 = np.asarray(x0)
    return zi.reshape((zi.shape[0],) + (1,) * x0.ndim + (2,)) * x0[None, ..., None]


def filtfilt(filt, rec):
    """Zero-phase filtering of every channel of a :class:`Recording`."""
    return rec.with_samples(filtfilt_array(filt, rec.samples, axis=-1))


def _epoch_len(epoch_seconds, fs):
    n = int(round(epoch_seconds * fs))
    if n <= 0:
        raise InvalidParameterError(f"epoch length {epoch_seconds} s is empty at {fs} Hz")
    return n


def _check_events(events, n_samples, n_epoch):
    bad = [(o, lab) for o, lab in events if o + n_epoch > n_samples]
    if bad:
        raise OutOfRangeError(
            f"{len(bad)} event(s) extend past the recording end ({n_samples} samples): {bad[:5]}",
            bad,
        )


def segment(rec, events, epoch_seconds=2.0, domain="imagined"):
    """Cut fixed-length epochs starting at each event onset."""
    n_epoch = _epoch_len(epoch_seconds, rec.sample_rate_hz)
    _check_events(events, rec.n_samples, n_epoch)
    idx = events.onsets[:, None] + np.arange(n_epoch)[None, :]
    epochs = np.transpose(rec.samples[:, idx], (1, 0, 2)) if len(events) else \
        np.zeros((0, rec.n_channels, n_epoch), dtype=rec.samples.dtype)
    return EpochSet(epochs, events.labels.copy(), np.full(len(events), domain), rec.sample_rate_hz)


def baseline_correct(rec, events, baseline_seconds=0.5, epoch_seconds=2.0):
    """Subtract the pre-onset mean from each trial, per channel.

    Samples outside ``[onset, onset + epoch)`` are left untouched.
    """
    fs = rec.sample_rate_hz
    n_base = int(round(baseline_seconds * fs))
    n_epoch = _epoch_len(epoch_seconds, fs)
    early = [(o, lab) for o, lab in events if o < n_base]
    if early:
        raise OutOfRangeError(
            f"{len(early)} event(s) start before a full {baseline_seconds} s baseline: {early[:5]}",
            early,
        )
    _check_events(events, rec.n_samples, n_epoch)
    out = np.array(rec.samples, dtype=float, copy=True)
    for onset, _ in events:
        if n_base:
            mean = rec.samples[:, onset - n_base:onset].mean(axis=1, keepdims=True)
            out[:, onset:onset + n_epoch] -= mean
    return rec.with_samples(out)


# ---------------------------------------------------------------- file formats

EEGB_VERSION = 1


def write_eegb(rec, path):
    """Write a recording as a JSON header line followed by f32le channel-major samples."""
    header = {
        "version": EEGB_VERSION,
        "fs_hz": float(rec.sample_rate_hz),
        "channels": list(rec.channel_names),
        "n_samples": int(rec.n_samples),
        "dtype": "f32le",
        "layout": "channel_major",
    }
    data = np.ascontiguousarray(rec.samples, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(data.tobytes())


def read_eegb(path):
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ParseError("EEGB header line is not terminated", offset=len(raw))
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"EEGB header is not valid JSON: {exc}", offset=0) from None
    for key in ("version", "fs_hz", "channels", "n_samples", "dtype", "layout"):
        if key not in header:
            raise ParseError(f"EEGB header is missing {key!r}", offset=0)
    if header["version"] != EEGB_VERSION or header["dtype"] != "f32le" \
            or header["layout"] != "channel_major":
        raise ParseError(f"unsupported EEGB header {header}", offset=0)
    n_ch, n = len(header["channels"]), int(header["n_samples"])
    body = raw[nl + 1:]
    if len(body) != 4 * n_ch * n:
        raise ParseError(
            f"EEGB body holds {len(body)} bytes, expected {4 * n_ch * n}",
            offset=nl + 1 + min(len(body), 4 * n_ch * n),
        )
    samples = np.frombuffer(body, dtype="<f4").reshape(n_ch, n).astype(np.float64)
    return Recording(header["fs_hz"], header["channels"], samples)


def write_events(events, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onset_sample", "label"])
        for onset, label in events:
            w.writerow([onset, label])


def read_events(path, vocabulary_size=13):
    onsets, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["onset_sample", "label"]:
            raise ParseError(f"events file must start with 'onset_sample,label', got {header}", 0)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                onsets.append(int(row[0]))
                labels.append(int(row[1]))
            except (ValueError, IndexError):
                raise ParseError(f"bad events row {lineno}: {row}") from None
    return EventList(np.array(onsets, dtype=np.int64), np.array(labels, dtype=np.int64),
                     vocabulary_size)
