"""Event-related (de)synchronization on a band x time-bin grid."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..errors import DegenerateInputError, InvalidParameterError
from ..signal_core import EpochSet


@dataclass(frozen=True)
class ErdErsGrid:
    bands: list
    time_bins: list
    values: np.ndarray  # [n_bands, n_bins], percent change vs reference
    scope: object = "average"

    def argmax(self):
        return np.unravel_index(np.argmax(self.values), self.values.shape)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["band_hz"] + [f"{a:.3f}-{b:.3f}" for a, b in self.time_bins])
            for (lo, hi), row in zip(self.bands, self.values):
                w.writerow([f"{lo:g}-{hi:g}"] + [repr(float(v)) for v in row])


def tile_bands(low_hz, high_hz, width_hz):
    """Contiguous bands of ``width_hz``; the last one is truncated at ``high_hz``."""
    if not width_hz > 0 or not low_hz < high_hz:
        raise InvalidParameterError(f"bad band tiling {low_hz}-{high_hz} step {width_hz}")
    starts = np.arange(low_hz, high_hz, width_hz)
    return [(float(s), float(min(s + width_hz, high_hz))) for s in starts]


def _band_power(x, fs, bands, nperseg):
    """Welch PSD of ``x[..., samples]`` integrated (mean) over each band -> ``[..., n_bands]``."""
    f, pxx = sps.welch(x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2, axis=-1)
    out = []
    for i, (lo, hi) in enumerate(bands):
        last = i == len(bands) - 1
        sel = (f >= lo) & ((f <= hi) if last else (f < hi))
        if not np.any(sel):
            raise InvalidParameterError(
                f"band {lo}-{hi} Hz holds no Welch frequency bin (resolution {fs / nperseg:.2f} Hz)"
            )
        out.append(pxx[..., sel].mean(axis=-1))
    return np.stack(out, axis=-1)


def erd_ers(epochs, band_width_hz=20.0, bin_seconds=0.25, range_hz=(30.0, 120.0),
            reference="first_bin", channels=None, max_nperseg=128):
    """Relative band-power change per (band, time bin), in percent.

    Parameters
    ----------
    epochs : EpochSet
    reference : {"first_bin"} or EpochSet or array_like
        ``"first_bin"`` uses the first time bin of ``epochs`` as baseline.
        An EpochSet (e.g. pre-trial segments) is split into bins of the same
        length and its mean bin power is the baseline.  An array gives the
        per-band reference power directly.
    channels : int or sequence of int, optional
        Channels to average over; all channels when omitted.
    """
    fs = epochs.sample_rate_hz
    lo, hi = range_hz
    if not 0 < lo < hi < fs / 2:
        raise InvalidParameterError(f"range {range_hz} must lie within (0, {fs / 2}) Hz")
    bands = tile_bands(lo, hi, band_width_hz)
    bin_len = int(round(bin_seconds * fs))
    n_bins = epochs.n_samples // bin_len if bin_len else 0
    if bin_len < 2 or n_bins < 1:
        raise InvalidParameterError(f"bin of {bin_seconds} s does not fit the epochs")
    nperseg = min(bin_len, max_nperseg)

    if channels is None:
        scope, chan = "average", slice(None)
    else:
        scope = channels
        chan = np.atleast_1d(np.asarray(channels, dtype=int))

    def grid_power(x):
        x = np.asarray(x, dtype=float)[:, chan, :]
        nb = x.shape[-1] // bin_len
        x = x[..., :nb * bin_len].reshape(x.shape[0], x.shape[1], nb, bin_len)
        p = _band_power(x, fs, bands, nperseg)  # [ep, ch, bin, band]
        return p.mean(axis=(0, 1)).T  # [band, bin]

    power = grid_power(epochs.epochs)
    if isinstance(reference, str):
        if reference != "first_bin":
            raise InvalidParameterError(f"unknown reference {reference!r}")
        ref = power[:, 0]
    elif isinstance(reference, EpochSet):
        ref = grid_power(reference.epochs).mean(axis=1)
    else:
        ref = np.asarray(reference, dtype=float).reshape(-1)
        if ref.size != len(bands):
            raise InvalidParameterError(f"reference has {ref.size} values for {len(bands)} bands")
    if np.any(ref <= 0):
        raise DegenerateInputError("reference power is zero in at least one band")
    values = 100.0 * (power - ref[:, None]) / ref[:, None]
    bins = [(i * bin_len / fs, (i + 1) * bin_len / fs) for i in range(n_bins)]
    return ErdErsGrid(bands, bins, values, scope)
