"""Synthetic EEG with planted class structure, a two-domain shift, and artifact mixtures.

Every epoch draws from its own counter-based generator
(``SeedSequence(seed, spawn_key=(domain, index))``) so output does not depend
on generation order.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import signal as sps

from .errors import InvalidParameterError
from .signal_core import EpochSet, Recording

_KEY_GLOBAL = 7
_KEY_IMAGINED = 0
_KEY_SPOKEN = 1


@dataclass(frozen=True)
class SynthSpec:
    n_channels: int = 64
    n_classes: int = 13
    trials_per_class: int = 50
    epoch_seconds: float = 2.0
    fs_hz: float = 1000.0
    boost: float | tuple = 6.0
    pink_alpha: float = 1.0
    base_sigma: float = 1.0
    shift_scale: float = 0.15
    shift_noise_sigma: float = 0.3
    planted_directions: tuple | None = None
    seed: int = 0
    dtype: str = "float64"
    allow_degenerate: bool = False

    @property
    def n_samples(self):
        return int(round(self.epoch_seconds * self.fs_hz))

    @property
    def boosts(self):
        b = np.broadcast_to(np.asarray(self.boost, dtype=float), (self.n_classes,))
        return b.copy()

    def validate(self):
        if self.n_channels < 2 or self.n_classes < 2 or self.trials_per_class < 1:
            raise InvalidParameterError("need >= 2 channels, >= 2 classes and >= 1 trial per class")
        if self.dtype not in ("float32", "float64"):
            raise InvalidParameterError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.n_samples < 2:
            raise InvalidParameterError("epoch is shorter than 2 samples")
        b = self.boosts
        if np.any(b < 1) or (np.any(b == 1) and not self.allow_degenerate):
            raise InvalidParameterError(f"boost must exceed 1, got {b.tolist()}")
        if self.base_sigma <= 0 or self.shift_scale < 0 or self.shift_noise_sigma < 0:
            raise InvalidParameterError("noise scales must be non-negative (base_sigma positive)")
        if self.planted_directions is None and self.n_classes > self.n_channels:
            raise InvalidParameterError("cannot plant more orthogonal directions than channels")
        if self.planted_directions is not None:
            d = np.asarray(self.planted_directions, dtype=float)
            if d.shape != (self.n_classes, self.n_channels):
                raise InvalidParameterError(f"planted_directions must be {self.n_classes} x {self.n_channels}")
            if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-9):
                raise InvalidParameterError("planted directions must be unit-norm")
            g = np.abs(d @ d.T)
            np.fill_diagonal(g, 0.0)
            if g.max() >= 0.5:
                raise InvalidParameterError(f"planted directions overlap (max |cos| {g.max():.3f} >= 0.5)")

    def to_dict(self):
        d = asdict(self)
        if d["planted_directions"] is not None:
            d["planted_directions"] = np.asarray(d["planted_directions"]).tolist()
        if isinstance(d["boost"], tuple):
            d["boost"] = list(d["boost"])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("boost", "planted_directions"):
            if isinstance(d.get(key), list):
                d[key] = tuple(tuple(r) if isinstance(r, list) else r for r in d[key])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    directions: np.ndarray  # [n_classes, n_channels]
    boosts: np.ndarray
    mixing: np.ndarray  # I + eps R applied to spoken epochs
    spec: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps({
            "directions": self.directions.tolist(),
            "boosts": self.boosts.tolist(),
            "mixing": self.mixing.tolist(),
            "spec": self.spec,
        })


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def pink_noise(rng, shape, alpha=1.0, dtype=np.float64):
    """Noise with power spectrum ~ 1/f**alpha along the last axis, unit overall variance.

    Computed in ``dtype`` throughout; float32 halves the cost of large batches.
    """
    n = shape[-1]
    spec = sfft.rfft(rng.standard_normal(shape, dtype=dtype), axis=-1)
    f = np.arange(spec.shape[-1], dtype=dtype)
    gain = np.zeros_like(f)
    gain[1:] = f[1:] ** (-alpha / 2.0)
    spec *= gain
    x = sfft.irfft(spec, n=n, axis=-1)
    return x / x.std()


def planted_directions(spec):
    if spec.planted_directions is not None:
        return np.asarray(spec.planted_directions, dtype=float)
    g = _rng(spec.seed, _KEY_GLOBAL, 0).standard_normal((spec.n_channels, spec.n_classes))
    q, r = np.linalg.qr(g)
    return (q * np.sign(np.diag(r))).T


def mixing_perturbation(spec):
    r = _rng(spec.seed, _KEY_GLOBAL, 1).standard_normal((spec.n_channels, spec.n_channels))
    r /= np.linalg.norm(r, 2)
    return np.eye(spec.n_channels) + spec.shift_scale * r


def labels_for(spec):
    return np.tile(np.arange(spec.n_classes), spec.trials_per_class)


def _class_epoch(rng, spec, direction, boost):
    dt = np.dtype(spec.dtype)
    shape = (spec.n_channels, spec.n_samples)
    x = pink_noise(rng, shape, spec.pink_alpha, dt)
    x *= dt.type(spec.base_sigma)
    if boost > 1:
        s = pink_noise(rng, (1, spec.n_samples), spec.pink_alpha, dt)[0]
        x += np.outer(direction.astype(dt), s) * dt.type(np.sqrt(boost - 1.0) * spec.base_sigma)
    return x


def generate(spec=SynthSpec()):
    """Imagined and spoken epoch sets plus the ground truth used to build them.

    Imagined epoch of class c: pink background plus a pink source along the
    planted direction of c with variance ``(boost - 1) * base_sigma**2``.
    Spoken epoch: an independently drawn epoch of the same kind, mixed by
    ``I + eps R`` and with white sensor noise added.
    """
    spec.validate()
    dirs = planted_directions(spec)
    boosts = spec.boosts
    mix = mixing_perturbation(spec)
    labels = labels_for(spec)
    n = labels.size
    shape = (n, spec.n_channels, spec.n_samples)
    imagined = np.empty(shape, dtype=spec.dtype)
    spoken = np.empty(shape, dtype=spec.dtype)
    dt = np.dtype(spec.dtype)
    mix_dt = mix.astype(dt)
    for k, c in enumerate(labels):
        imagined[k] = _class_epoch(_rng(spec.seed, _KEY_IMAGINED, k), spec, dirs[c], boosts[c])
        rng = _rng(spec.seed, _KEY_SPOKEN, k)
        x = mix_dt @ _class_epoch(rng, spec, dirs[c], boosts[c])
        if spec.shift_noise_sigma:
            x += rng.standard_normal(x.shape, dtype=dt) * dt.type(spec.shift_noise_sigma)
        spoken[k] = x
    truth = GroundTruth(dirs, boosts, mix, spec.to_dict())
    return (
        EpochSet(imagined, labels, np.full(n, "imagined"), spec.fs_hz),
        EpochSet(spoken, labels.copy(), np.full(n, "spoken"), spec.fs_hz),
        truth,
    )


def background(spec, n_samples, key):
    """Class-free pink background, e.g. for pre-trial gaps in a continuous recording."""
    rng = _rng(spec.seed, _KEY_GLOBAL, 100 + key)
    return spec.base_sigma * pink_noise(rng, (spec.n_channels, n_samples), spec.pink_alpha)


def to_continuous(epochs, spec, gap_seconds=0.5, domain_key=0, channel_names=None):
    """Lay epochs end to end with background gaps before each; returns (Recording, EventList)."""
    from .signal_core import EventList

    fs = epochs.sample_rate_hz
    gap = int(round(gap_seconds * fs))
    n_ep, n_ch, n_s = epochs.epochs.shape
    total = n_ep * (gap + n_s)
    samples = np.empty((n_ch, total))
    onsets = np.empty(n_ep, dtype=np.int64)
    pos = 0
    for k in range(n_ep):
        if gap:
            samples[:, pos:pos + gap] = background(spec, gap, 1000 * domain_key + k)[:, :gap]
        pos += gap
        onsets[k] = pos
        samples[:, pos:pos + n_s] = epochs.epochs[k]
        pos += n_s
    names = channel_names or [f"EEG{i:03d}" for i in range(n_ch)]
    vocab = max(int(epochs.labels.max()) + 1, 13) if n_ep else 13
    return Recording(fs, names, samples), EventList(onsets, epochs.labels, vocab)


# ---------------------------------------------------------------- ICA substrate

@dataclass(frozen=True)
class SourcesTruth:
    sources: np.ndarray  # [n_sources, n_samples]
    mixing: np.ndarray  # [n_channels, n_sources]
    blink_index: int
    names: tuple


def _waveforms(t, rng, count):
    bank = [
        ("sine", lambda: np.sin(2 * np.pi * 7.0 * t)),
        ("square", lambda: sps.square(2 * np.pi * 3.0 * t)),
        ("sawtooth", lambda: sps.sawtooth(2 * np.pi * 5.0 * t)),
        ("pink", lambda: pink_noise(rng, (t.size,), 1.0)),
    ]
    out = []
    for i in range(count):
        if i < len(bank):
            out.append(bank[i])
        else:
            f = 11.0 + 2.3 * (i - len(bank))
            out.append((f"sine{f:g}", lambda f=f: np.sin(2 * np.pi * f * t + 0.3 * i)))
    return [(name, make()) for name, make in out]


def blink_source(rng, t, rate_hz=0.5, width_s=0.12):
    """Sparse positive Gaussian bumps at seeded times."""
    n_blinks = max(1, int(round(t[-1] * rate_hz)))
    centers = np.sort(rng.uniform(t[0] + 0.5, t[-1] - 0.5, n_blinks))
    x = np.zeros_like(t)
    for c in centers:
        x += np.exp(-0.5 * ((t - c) / width_s) ** 2)
    return x


def generate_artifact_mixture(seed=0, n_channels=8, n_sources=4, fs_hz=250.0, seconds=40.0):
    """Mixed recording with one blink source, the EOG reference, and the ground truth.

    The last source is the blink; the EOG reference channel is an exact copy
    of it.
    """
    if not 2 <= n_sources <= n_channels:
        raise InvalidParameterError(f"need 2 <= n_sources <= n_channels, got {n_sources}, {n_channels}")
    rng = _rng(seed, 3, 0)
    t = np.arange(int(round(seconds * fs_hz))) / fs_hz
    named = _waveforms(t, rng, n_sources - 1)
    blink = blink_source(rng, t)
    names = tuple(n for n, _ in named) + ("blink",)
    sources = np.vstack([w for _, w in named] + [blink])
    sources = (sources - sources.mean(axis=1, keepdims=True)) / sources.std(axis=1, keepdims=True)
    while True:
        a = rng.standard_normal((n_channels, n_sources))
        if np.linalg.cond(a) < 20:
            break
    mixed = a @ sources
    rec = Recording(fs_hz, [f"EEG{i:03d}" for i in range(n_channels)], mixed)
    refs = Recording(fs_hz, ["EOG"], sources[-1:].copy())
    return rec, refs, SourcesTruth(sources, a, n_sources - 1, names)
