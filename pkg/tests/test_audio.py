import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nse.audio import (
    AudioClip,
    denoise,
    istft,
    lowpass_kernel,
    read_wav,
    resample,
    spectral_gate,
    stft,
    write_wav,
)
from nse.errors import InvalidParameterError, LengthError
from oracles import fit_sinusoid, snr_db


def tone(freq, fs, seconds, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t + phase)


# ---------------------------------------------------------------- clip

def test_stereo_is_averaged(caplog):
    with caplog.at_level(logging.WARNING):
        c = AudioClip(8000, np.array([[0.2, 0.4], [0.0, -0.5]]))
    assert np.allclose(c.samples, [0.3, -0.25])
    assert "mono" in caplog.text


def test_out_of_range_is_clipped_and_counted():
    c = AudioClip(8000, np.array([0.5, 1.5, -2.0]))
    assert c.samples.tolist() == [0.5, 1.0, -1.0]
    assert c.clipped == 2


@pytest.mark.parametrize("fs", [0, -1, 44100.5])
def test_bad_rate(fs):
    with pytest.raises(InvalidParameterError):
        AudioClip(fs, np.zeros(4))


# ---------------------------------------------------------------- resample

def test_halving_keeps_1khz_amplitude():
    clip = AudioClip(44100, tone(1000, 44100, 2.0))
    out = resample(clip, 22050)
    assert out.sample_rate_hz == 22050
    y = out.samples[2000:-2000]
    amp = fit_sinusoid(y, 22050, 1000.0)
    assert abs(20 * np.log10(amp)) <= 0.1
    # the frequency is the fitted peak of a fine periodogram
    f = np.fft.rfftfreq(8 * y.size, 1 / 22050)
    peak = f[np.argmax(np.abs(np.fft.rfft(y * np.hanning(y.size), 8 * y.size)))]
    assert abs(peak - 1000.0) < 1.0


def test_identity_ratio_is_bitwise():
    x = np.random.default_rng(0).uniform(-1, 1, 1000)
    clip = AudioClip(22050, x)
    out = resample(clip, 22050)
    assert np.array_equal(out.samples, clip.samples)


def test_length_arithmetic():
    out = resample(AudioClip(44100, np.zeros(88200)), 22050)
    assert out.samples.size == 44100


@pytest.mark.parametrize("src,dst,n", [(44100, 22050, 1001), (48000, 22050, 4801), (16000, 22050, 333),
                                       (8000, 22050, 1)])
def test_length_rounding(src, dst, n):
    out = resample(AudioClip(src, np.zeros(n)), dst)
    assert out.samples.size == int(np.floor(n * dst / src + 0.5))


def test_kernel_shape():
    h = lowpass_kernel(1, 2)
    assert h.size == 64 * 2 + 1
    assert abs(h.sum() - 1) < 1e-12
    assert np.allclose(h, h[::-1])


def test_upsampling_tone_keeps_amplitude():
    out = resample(AudioClip(16000, tone(440, 16000, 1.0, 0.5)), 22050)
    amp = fit_sinusoid(out.samples[1000:-1000], 22050, 440.0)
    assert abs(20 * np.log10(amp / 0.5)) < 0.1


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 20), a=st.floats(-0.4, 0.4), b=st.floats(-0.4, 0.4))
def test_resampler_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    # kept small so no output sample reaches the clipping limit
    x, y = rng.uniform(-0.5, 0.5, (2, 600))

    def r(v):
        return resample(AudioClip(44100, v), 22050).samples
    assert np.max(np.abs(r(a * x + b * y) - (a * r(x) + b * r(y)))) < 1e-6


@pytest.mark.parametrize("src,dst", [(44100, 22050), (48000, 22050)])
def test_resampler_time_invariance(src, dst):
    from math import gcd
    g = gcd(src, dst)
    up, down = dst // g, src // g
    x = np.random.default_rng(1).uniform(-0.5, 0.5, 50 * down + 4000)
    y0 = resample(AudioClip(src, x[down:]), dst).samples
    y1 = resample(AudioClip(src, x), dst).samples
    # dropping one input period (down samples) shifts the output by up samples
    margin = 64 * max(up, down) // down + 2
    a = y0[margin:-margin]
    b = y1[up + margin:up + margin + a.size]
    assert np.max(np.abs(a - b)) < 1e-6


def test_resample_bad_target():
    with pytest.raises(InvalidParameterError):
        resample(AudioClip(8000, np.zeros(10)), 0)


# ---------------------------------------------------------------- STFT

@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 9000), seed=st.integers(0, 2 ** 20))
def test_stft_round_trip(n, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, n)
    back = istft(stft(x), n)
    assert np.max(np.abs(back - x)) <= 1e-6 * max(np.max(np.abs(x)), 1e-12)


def test_istft_frame_mismatch():
    with pytest.raises(LengthError):
        istft(stft(np.zeros(5000)), 9000)


# ---------------------------------------------------------------- gate

FS = 22050


@pytest.fixture(scope="module")
def noisy_tone():
    rng = np.random.default_rng(0)
    clean = tone(440, FS, 3.0, 0.25)
    sigma = np.sqrt(np.mean(clean ** 2))  # 0 dB SNR
    noisy = clean + sigma * rng.standard_normal(clean.size)
    profile = sigma * rng.standard_normal(FS)
    return clean, AudioClip(FS, noisy), AudioClip(FS, profile)


def test_silence_in_silence_out():
    z = AudioClip(FS, np.zeros(3 * 2048))
    out = spectral_gate(z, AudioClip(FS, np.zeros(4096)))
    assert np.max(np.abs(out.samples)) <= 1e-9


def test_gate_improves_snr_by_10db(noisy_tone):
    clean, noisy, profile = noisy_tone
    before = snr_db(clean, noisy.samples)
    after = snr_db(clean, spectral_gate(noisy, profile).samples)
    assert abs(before) < 0.2
    assert after - before >= 10.0


def test_gate_percentile_mode_on_intermittent_tone():
    # without a profile the per-bin percentile must come from tone-free frames,
    # so the tone is on for less than 80% of the clip
    rng = np.random.default_rng(5)
    clean = tone(440, FS, 4.0, 0.25)
    clean[clean.size // 2:] = 0.0
    sigma = np.sqrt(np.mean(clean[:clean.size // 2] ** 2))
    noisy = clean + sigma * rng.standard_normal(clean.size)
    before = snr_db(clean, noisy)
    after = snr_db(clean, spectral_gate(AudioClip(FS, noisy)).samples)
    # 2 x P20 of Rayleigh noise magnitudes sits below their mean, so gating is partial
    assert after - before >= 3.0


def test_gate_percentile_mode_treats_steady_tone_as_noise(noisy_tone):
    # a tone present in every frame sets its own bin threshold and is gated away
    clean, noisy, _ = noisy_tone
    out = spectral_gate(noisy).samples
    assert fit_sinusoid(out[4096:-4096], FS, 440.0) < 0.5 * 0.25


def test_threshold_dominance_attenuates():
    clean = AudioClip(FS, tone(440, FS, 1.0, 0.2))
    louder = AudioClip(FS, tone(440, FS, 1.0, 0.6))
    out = spectral_gate(clean, louder)
    assert np.sum(out.samples ** 2) < 0.25 * np.sum(clean.samples ** 2)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 20), use_profile=st.booleans())
def test_gate_never_adds_energy(seed, use_profile):
    rng = np.random.default_rng(seed)
    x = AudioClip(FS, 0.3 * np.clip(rng.standard_normal(6000), -3, 3))
    profile = AudioClip(FS, 0.1 * np.clip(rng.standard_normal(5000), -3, 3)) if use_profile else None
    y = spectral_gate(x, profile)
    e_in, e_out = np.sum(x.samples ** 2), np.sum(y.samples ** 2)
    assert e_out <= e_in * (1 + 1e-9)


def test_gate_too_short():
    with pytest.raises(LengthError):
        spectral_gate(AudioClip(FS, np.zeros(4095)))


def test_gate_profile_rate_mismatch(noisy_tone):
    _, noisy, _ = noisy_tone
    with pytest.raises(InvalidParameterError):
        spectral_gate(noisy, AudioClip(16000, np.zeros(5000)))


def test_denoise_resamples_first():
    x = AudioClip(44100, tone(440, 44100, 1.0, 0.3))
    out = denoise(x, AudioClip(44100, np.zeros(8192)))
    assert out.sample_rate_hz == 22050
    assert out.samples.size == 22050


def test_gate_does_not_mutate(noisy_tone):
    _, noisy, profile = noisy_tone
    before = noisy.samples.copy()
    spectral_gate(noisy, profile)
    assert np.array_equal(noisy.samples, before)


# ---------------------------------------------------------------- WAV

def test_wav_float_round_trip(tmp_path):
    x = np.random.default_rng(2).uniform(-1, 1, 500).astype(np.float32).astype(float)
    p = tmp_path / "a.wav"
    write_wav(AudioClip(22050, x), p, "FLOAT")
    back = read_wav(p)
    assert back.sample_rate_hz == 22050
    assert np.array_equal(back.samples, x)


def test_wav_pcm16_round_trip(tmp_path):
    x = np.random.default_rng(3).uniform(-1, 1, 500)
    p = tmp_path / "a.wav"
    write_wav(AudioClip(8000, x), p)
    raw = p.read_bytes()
    assert raw[:4] == b"RIFF" and raw[8:12] == b"WAVE"
    back = read_wav(p)
    assert np.max(np.abs(back.samples - x)) <= 0.5 / 32768 + 1e-15


def test_wav_bad_subtype(tmp_path):
    with pytest.raises(InvalidParameterError):
        write_wav(AudioClip(8000, np.zeros(4)), tmp_path / "a.wav", "PCM_24")
