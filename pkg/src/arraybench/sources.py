"""Speech-like test sources and WAV input/output."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import butter, resample_poly, sosfilt

# rough vowel formant ranges (Hz)
_F1 = (300.0, 850.0)
_F2 = (850.0, 2400.0)
_F3 = (2300.0, 3200.0)


def _formant_gain(freq, formants, bandwidths):
    g = np.zeros_like(freq)
    for fc, bw in zip(formants, bandwidths):
        g += 1.0 / (1.0 + ((freq - fc) / (0.5 * bw)) ** 2)
    return g


def synthetic_speech(seed: int, duration: float = 4.0, fs: int = 16000) -> np.ndarray:
    """Harmonic voice-like signal with syllabic amplitude modulation.

    f0 is drawn from [90, 250] Hz with slow drift, the syllable rate from
    [2, 6] Hz. Each syllable gets its own formant pattern; some syllable
    gaps carry high-passed noise bursts standing in for fricatives. Output
    has unit RMS.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    f0_base = rng.uniform(90.0, 250.0)
    drift = 1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.2, 0.6) * t + rng.uniform(0, 2 * np.pi))
    vibrato = 1.0 + 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 6.0) * t)
    f0 = f0_base * drift * vibrato
    phase = 2 * np.pi * np.cumsum(f0) / fs

    rate = rng.uniform(2.0, 6.0)
    syl_len = int(fs / rate)
    n_syl = n // syl_len + 1
    syl_idx = np.minimum(np.arange(n) // syl_len, n_syl - 1)
    pos = (np.arange(n) % syl_len) / syl_len
    voiced = rng.random(n_syl) < 0.85
    if not voiced.any():
        # fricative level follows the voice level, so keep at least one voiced syllable
        voiced[rng.integers(n_syl)] = True
    env = np.sin(np.pi * pos) ** 2 * voiced[syl_idx]

    formants = np.stack(
        [rng.uniform(*_F1, n_syl), rng.uniform(*_F2, n_syl), rng.uniform(*_F3, n_syl)], axis=1
    )
    # glide formants between consecutive syllables
    nxt = np.minimum(syl_idx + 1, n_syl - 1)
    fmt = formants[syl_idx] * (1 - pos[:, None]) + formants[nxt] * pos[:, None]
    bws = (80.0, 120.0, 180.0)

    voice = np.zeros(n)
    k_max = int((fs / 2 - 200) / f0.min())
    for k in range(1, k_max + 1):
        fk = k * f0
        gain = _formant_gain(fk, fmt.T, bws) / k**0.5
        gain[fk >= fs / 2 - 200] = 0.0
        voice += gain * np.sin(k * phase)
    voice *= env

    noise = rng.standard_normal(n)
    noise = sosfilt(butter(4, 2500.0, "highpass", fs=fs, output="sos"), noise)
    fric = (~voiced[syl_idx]) * np.sin(np.pi * pos) ** 2 * 0.3
    gaps = (rng.random(n_syl) < 0.3)[syl_idx] * (pos > 0.85) * 0.15
    out = voice + noise * (fric + gaps) * np.std(voice)
    return out / np.sqrt(np.mean(out**2))


def read_wav(path) -> tuple[np.ndarray, int]:
    """Float signal in [-1, 1] of shape (samples,) or (channels, samples)."""
    fs, data = wavfile.read(path)
    if data.dtype.kind == "i":
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max)
    elif data.dtype.kind == "u":
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.T
    return data, int(fs)


def write_wav(path, x: np.ndarray, fs: int = 16000) -> None:
    """32-bit float WAV; multichannel input is (channels, samples)."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 2:
        x = x.T
    wavfile.write(str(path), fs, np.ascontiguousarray(x))


def load_mono(path, fs: int = 16000) -> np.ndarray:
    """Read a WAV, average channels and resample to ``fs``."""
    x, rate = read_wav(path)
    if x.ndim == 2:
        x = x.mean(axis=0)
    if rate != fs:
        from math import gcd

        g = gcd(rate, fs)
        x = resample_poly(x, fs // g, rate // g)
    return x


def list_sources(directory) -> list[Path]:
    return sorted(Path(directory).glob("**/*.wav"))
