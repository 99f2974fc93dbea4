"""Consolidated configuration and the end-to-end preprocessing chain."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import InvalidParameterError
from .signal_core import baseline_correct, cascade, design_bandpass, design_notch, filtfilt, segment
from .synthgen import SynthSpec


@dataclass(frozen=True)
class PipelineConfig:
    fs_hz: float = 1000.0
    band_low_hz: float = 30.0
    band_high_hz: float = 120.0
    bandpass_order: int = 5
    notch_hz: tuple = (60.0, 120.0)
    notch_q: float = 30.0
    epoch_seconds: float = 2.0
    baseline_seconds: float = 0.5
    patterns_per_class: int = 8
    ridge: float = 1e-6
    n_windows: int = 16
    eps: float = 1e-12
    ica_threshold: float = 0.8
    ica_components: int | None = None
    erd_band_width_hz: float = 20.0
    erd_bin_seconds: float = 0.25
    erd_range_hz: tuple = (30.0, 120.0)
    tsne_perplexity: float = 30.0
    tsne_iterations: int = 1000
    tsne_learning_rate: float = 200.0
    audio_target_hz: int = 22050
    seed: int = 0
    synth: dict = field(default_factory=dict)

    def validate(self):
        nyq = self.fs_hz / 2.0
        if not 0 < self.band_low_hz < self.band_high_hz < nyq:
            raise InvalidParameterError(
                f"band edges {self.band_low_hz}-{self.band_high_hz} Hz must lie below Nyquist ({nyq} Hz)"
            )
        for f in self.notch_hz:
            if not 0 < f < nyq:
                raise InvalidParameterError(f"notch {f} Hz must lie below Nyquist ({nyq} Hz)")
        lo, hi = self.erd_range_hz
        if not 0 < lo < hi < nyq:
            raise InvalidParameterError(f"ERD/ERS range {self.erd_range_hz} must lie below Nyquist")
        n_epoch = int(round(self.epoch_seconds * self.fs_hz))
        if self.n_windows * 2 > n_epoch:
            raise InvalidParameterError(
                f"{self.n_windows} windows need at least {2 * self.n_windows} samples per epoch, have {n_epoch}"
            )
        if self.patterns_per_class < 2 or self.patterns_per_class % 2:
            raise InvalidParameterError("patterns_per_class must be even and >= 2")
        if not 0 < self.ica_threshold <= 1:
            raise InvalidParameterError("ica_threshold must be in (0, 1]")
        return self

    def synth_spec(self, seed=None):
        kw = {"fs_hz": self.fs_hz, "epoch_seconds": self.epoch_seconds,
              "seed": self.seed if seed is None else seed}
        kw.update(self.synth)
        if seed is not None:
            kw["seed"] = seed
        return SynthSpec.from_dict(kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidParameterError(f"unknown config field(s) {unknown}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d).validate()

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidParameterError(f"config {path} is not JSON: {exc}") from None
        return cls.from_dict(d)

    def override(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw).validate() if kw else self


def line_filter(cfg, fs_hz):
    """Notches followed by the bandpass, as one cascade."""
    parts = [design_notch(f, cfg.notch_q, fs_hz) for f in cfg.notch_hz]
    parts.append(design_bandpass(cfg.bandpass_order, cfg.band_low_hz, cfg.band_high_hz, fs_hz))
    return cascade(*parts)


def preprocess(rec, events, cfg):
    """Notch -> bandpass (zero-phase) -> per-trial baseline correction."""
    cleaned = filtfilt(line_filter(cfg, rec.sample_rate_hz), rec)
    return baseline_correct(cleaned, events, cfg.baseline_seconds, cfg.epoch_seconds)


def epochs_from(rec, events, cfg, domain):
    return segment(rec, events, cfg.epoch_seconds, domain)
