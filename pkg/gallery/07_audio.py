"""Resample a 44.1 kHz tone to 22.05 kHz and spectral-gate white noise away."""
import numpy as np

from nse.audio import AudioClip, denoise, resample

fs = 44100
t = np.arange(3 * fs) / fs
rng = np.random.default_rng(0)
clean = 0.25 * np.sin(2 * np.pi * 440 * t)
sigma = np.sqrt(np.mean(clean ** 2))
noisy = AudioClip(fs, clean + sigma * rng.standard_normal(t.size))
profile = AudioClip(fs, sigma * rng.standard_normal(fs))

ref = resample(AudioClip(fs, clean), 22050).samples
out = denoise(noisy, profile)


def snr(est):
    return 10 * np.log10(np.sum(ref ** 2) / np.sum((est - ref) ** 2))


print(f"{out.sample_rate_hz} Hz, {out.samples.size} samples")
print(f"SNR {snr(resample(noisy, 22050).samples):.1f} dB -> {snr(out.samples):.1f} dB")
