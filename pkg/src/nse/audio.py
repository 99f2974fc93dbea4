"""Voice-track preprocessing: polyphase resampling and stationary spectral gating."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy import ndimage
from scipy import signal as sps
from scipy.io import wavfile

from .errors import InvalidParameterError, LengthError

log = logging.getLogger(__name__)

TARGET_RATE_HZ = 22050
KAISER_BETA = 8.6
TAPS_PER_PHASE = 64


@dataclass(frozen=True)
class AudioClip:
    """Mono clip with samples in [-1, 1]; ``clipped`` counts samples forced into range."""

    sample_rate_hz: int
    samples: np.ndarray
    clipped: int = 0

    def __post_init__(self):
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise InvalidParameterError(f"sample rate must be a positive integer, got {self.sample_rate_hz}")
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 2:
            log.warning("averaging %d channels to mono", x.shape[1])
            x = x.mean(axis=1)
        if x.ndim != 1:
            raise InvalidParameterError(f"samples must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("audio contains non-finite samples")
        over = int(np.count_nonzero(np.abs(x) > 1.0))
        if over:
            log.warning("clipping %d samples to [-1, 1]", over)
            x = np.clip(x, -1.0, 1.0)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "clipped", self.clipped + over)

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


def lowpass_kernel(up, down, taps_per_phase=TAPS_PER_PHASE, beta=KAISER_BETA):
    """Kaiser-windowed sinc with cutoff at the lower of the two Nyquist rates.

    Length is ``taps_per_phase * max(up, down) + 1`` at the upsampled rate;
    DC gain is 1.
    """
    ratio = max(up, down)
    half = taps_per_phase * ratio // 2
    t = np.arange(-half, half + 1)
    h = np.sinc(t / ratio) * sps.windows.kaiser(t.size, beta)
    return h / h.sum()


def resample(clip, target_hz=TARGET_RATE_HZ):
    """Rational-ratio polyphase resampling; output length ``round(n * target / source)``."""
    if int(target_hz) != target_hz or target_hz <= 0:
        raise InvalidParameterError(f"target rate must be a positive integer, got {target_hz}")
    src = clip.sample_rate_hz
    if target_hz == src:
        return AudioClip(src, clip.samples.copy())
    g = gcd(int(target_hz), src)
    up, down = int(target_hz) // g, src // g
    n_out = int(np.floor(clip.samples.size * up / down + 0.5))
    y = sps.resample_poly(clip.samples, up, down, window=lowpass_kernel(up, down))
    return AudioClip(int(target_hz), y[:n_out])


# ---------------------------------------------------------------- STFT

def _frame_geometry(n, n_fft, hop):
    left = n_fft - hop
    total = left + n + (n_fft - hop)
    n_frames = int(np.ceil((total - n_fft) / hop)) + 1
    return left, n_frames, (n_frames - 1) * hop + n_fft


def stft(x, n_fft=2048, hop=512):
    """Hann-windowed one-sided STFT ``[n_frames, n_fft // 2 + 1]``.

    The signal is zero-padded so every input sample is covered by the same
    number of frames, which makes the frame a tight one.
    """
    x = np.asarray(x, dtype=float)
    left, n_frames, padded = _frame_geometry(x.size, n_fft, hop)
    buf = np.zeros(padded)
    buf[left:left + x.size] = x
    frames = np.lib.stride_tricks.sliding_window_view(buf, n_fft)[::hop][:n_frames]
    return np.fft.rfft(frames * sps.get_window("hann", n_fft), axis=-1)


def interior_frames(n, n_fft=2048, hop=512):
    """Slice of the frames that lie entirely inside an ``n``-sample signal."""
    left, n_frames, _ = _frame_geometry(n, n_fft, hop)
    first = -(-left // hop)
    last = (left + n - n_fft) // hop
    return slice(first, max(first, last + 1))


def istft(spec, length, n_fft=2048, hop=512):
    """Weighted overlap-add inverse of :func:`stft`."""
    left, n_frames, padded = _frame_geometry(length, n_fft, hop)
    if spec.shape[0] != n_frames:
        raise LengthError(f"{spec.shape[0]} frames do not match a {length}-sample signal")
    w = sps.get_window("hann", n_fft)
    frames = np.fft.irfft(spec, n=n_fft, axis=-1) * w
    out = np.zeros(padded)
    norm = np.zeros(padded)
    for i in range(n_frames):
        out[i * hop:i * hop + n_fft] += frames[i]
        norm[i * hop:i * hop + n_fft] += w * w
    out = out[left:left + length]
    norm = norm[left:left + length]
    return out / norm


def gate_thresholds(mag_noise=None, mag_clip=None, n_std=1.5, percentile=20.0, percentile_gain=2.0):
    """Per-frequency thresholds from a noise profile or, without one, a clip percentile."""
    if mag_noise is not None:
        return mag_noise.mean(axis=0) + n_std * mag_noise.std(axis=0)
    return np.percentile(mag_clip, percentile, axis=0) * percentile_gain


def spectral_gate(clip, noise_profile=None, n_fft=2048, hop=512, n_std=1.5, percentile=20.0,
                  percentile_gain=2.0, sigmoid_width=0.25, smooth=(3, 3)):
    """Stationary spectral-gating noise reduction.

    Parameters
    ----------
    noise_profile : AudioClip, optional
        Noise-only recording.  Thresholds are its per-bin magnitude mean plus
        ``n_std`` standard deviations; without it, ``percentile_gain`` times
        the per-bin ``percentile`` of the clip itself.
    sigmoid_width : float
        Soft-mask slope, relative to the threshold.
    smooth : (int, int)
        Time x frequency size of the mask averaging window.
    """
    n = clip.samples.size
    if n < 2 * n_fft:
        raise LengthError(f"clip of {n} samples is shorter than 2 x FFT size ({2 * n_fft})")
    spec = stft(clip.samples, n_fft, hop)
    mag = np.abs(spec)
    if noise_profile is not None:
        if noise_profile.sample_rate_hz != clip.sample_rate_hz:
            raise InvalidParameterError("noise profile sample rate differs from the clip")
        if noise_profile.samples.size < n_fft:
            raise LengthError(f"noise profile shorter than one FFT frame ({n_fft})")
        # statistics from full frames only; zero-padded edge frames understate the noise
        noise_mag = np.abs(stft(noise_profile.samples, n_fft, hop))
        noise_mag = noise_mag[interior_frames(noise_profile.samples.size, n_fft, hop)]
        thr = gate_thresholds(noise_mag, n_std=n_std)
    else:
        thr = gate_thresholds(mag_clip=mag[interior_frames(n, n_fft, hop)], percentile=percentile,
                              percentile_gain=percentile_gain)
    scale = sigmoid_width * thr[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(scale > 0, (mag - thr[None, :]) / np.where(scale > 0, scale, 1.0),
                     np.where(mag > 0, np.inf, -np.inf))
        mask = 1.0 / (1.0 + np.exp(-z))
    mask = ndimage.uniform_filter(mask, size=smooth, mode="nearest")
    np.clip(mask, 0.0, 1.0, out=mask)
    return AudioClip(clip.sample_rate_hz, istft(spec * mask, n, n_fft, hop))


def denoise(clip, noise_profile=None, target_hz=TARGET_RATE_HZ, **gate_kwargs):
    """Resample to ``target_hz`` then gate."""
    clip = resample(clip, target_hz)
    if noise_profile is not None:
        noise_profile = resample(noise_profile, target_hz)
    return spectral_gate(clip, noise_profile, **gate_kwargs)


# ---------------------------------------------------------------- WAV I/O

def read_wav(path):
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(float)
    elif data.dtype == np.int32:
        x = data.astype(float) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    else:
        raise InvalidParameterError(f"unsupported WAV sample type {data.dtype}")
    return AudioClip(int(rate), x)


def write_wav(clip, path, subtype="PCM_16"):
    """Canonical little-endian RIFF, 16-bit PCM or IEEE float32."""
    if subtype == "PCM_16":
        data = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    elif subtype == "FLOAT":
        data = clip.samples.astype("<f4")
    else:
        raise InvalidParameterError(f"subtype must be PCM_16 or FLOAT, got {subtype!r}")
    wavfile.write(path, clip.sample_rate_hz, data)
