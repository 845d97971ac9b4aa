"""STFT analysis/synthesis, complex input packing and fractional delays.

Synthesis is weighted overlap-add: frames are windowed a second time and the
sum is divided by the accumulated squared window, so Hann at any hop that
keeps the squared-window sum positive reconstructs exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .errors import AlignmentError, TooShortError


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    hop: int = 160
    sample_rate: int = 16000

    def __post_init__(self):
        if self.hop <= 0 or self.hop > self.fft_size:
            raise ValueError("hop must lie in (0, fft_size]")
        if self.fft_size % 2:
            raise ValueError("fft_size must be even")

    @property
    def window(self) -> np.ndarray:
        return get_window("hann", self.fft_size, fftbins=True)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.fft_size, 1.0 / self.sample_rate)

    def n_frames(self, length: int) -> int:
        padded = length + self.fft_size
        return 1 + int(np.ceil((padded - self.fft_size) / self.hop))


@dataclass
class ComplexSpectrogram:
    """``data`` has shape (channels, bins, frames)."""

    data: np.ndarray
    config: StftConfig
    length: int

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    def channel(self, m: int) -> "ComplexSpectrogram":
        return ComplexSpectrogram(self.data[m : m + 1], self.config, self.length)


def _frame_positions(cfg: StftConfig, length: int) -> tuple[int, int]:
    n_frames = cfg.n_frames(length)
    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    return n_frames, total


def stft(x, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """One-sided STFT of a (channels, samples) or (samples,) signal.

    The signal is zero-padded by fft_size/2 on both ends so every sample is
    covered by the full set of overlapping frames.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    length = x.shape[-1]
    if length < cfg.fft_size:
        raise TooShortError(f"signal of {length} samples is shorter than one frame")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    n_frames, total = _frame_positions(cfg, length)
    half = cfg.fft_size // 2
    padded = np.zeros((x.shape[0], total))
    padded[:, half : half + length] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.fft_size, axis=-1)[
        :, :: cfg.hop
    ][:, :n_frames]
    spec = np.fft.rfft(frames * cfg.window, axis=-1)
    return ComplexSpectrogram(np.ascontiguousarray(spec.transpose(0, 2, 1)), cfg, length)


def window_energy_envelope(cfg: StftConfig, length: int) -> np.ndarray:
    """Sum over frames of the squared analysis window at each signal sample."""
    n_frames, total = _frame_positions(cfg, length)
    env = np.zeros(total)
    w2 = cfg.window**2
    for t in range(n_frames):
        env[t * cfg.hop : t * cfg.hop + cfg.fft_size] += w2
    half = cfg.fft_size // 2
    return env[half : half + length]


def istft(S: ComplexSpectrogram, length: int | None = None) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`stft`; returns (channels, samples)."""
    cfg = S.config
    length = S.length if length is None else length
    n_frames = S.data.shape[-1]
    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    w = cfg.window
    frames = np.fft.irfft(S.data.transpose(0, 2, 1), n=cfg.fft_size, axis=-1) * w
    out = np.zeros((S.data.shape[0], total))
    norm = np.zeros(total)
    for t in range(n_frames):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.fft_size)
        out[:, sl] += frames[:, t]
        norm[sl] += w**2
    half = cfg.fft_size // 2
    norm = np.where(norm > 1e-10, norm, 1.0)
    out = out / norm
    out = out[:, half : half + length]
    if out.shape[1] < length:
        out = np.pad(out, ((0, 0), (0, length - out.shape[1])))
    return out


def spectral_energy(S: ComplexSpectrogram) -> float:
    """Total frame energy from one-sided spectra (Parseval per frame)."""
    n = S.config.fft_size
    p = np.abs(S.data) ** 2
    weights = np.full(S.config.n_bins, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return float((p * weights[None, :, None]).sum() / n)


def windowed_energy(x, cfg: StftConfig = StftConfig()) -> float:
    """Waveform energy weighted by the accumulated squared analysis window."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    env = window_energy_envelope(cfg, x.shape[-1])
    return float((x**2 * env).sum())


def complex_input(S: ComplexSpectrogram) -> np.ndarray:
    """Real tensor of shape (2M, bins, frames): all real planes, then all imaginary."""
    return np.concatenate([S.data.real, S.data.imag], axis=0)


def unpack_complex_input(planes: np.ndarray) -> np.ndarray:
    m = planes.shape[0] // 2
    if planes.shape[0] != 2 * m:
        raise AlignmentError("complex input needs an even number of planes")
    return planes[:m] + 1j * planes[m:]


def fractional_delay(x, delay: float) -> np.ndarray:
    """Delay a signal by ``delay`` samples with an FFT phase ramp (circular).

    Positive values delay; negative values advance. Works on the last axis.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if abs(delay) >= n:
        raise ValueError("delay must be shorter than the signal")
    if delay == 0:
        return x.copy()
    X = np.fft.rfft(x, axis=-1)
    k = np.fft.rfftfreq(n)
    ramp = np.exp(-2j * np.pi * k * delay)
    if n % 2 == 0:
        # keep the Nyquist bin real so the output stays real and invertible
        ramp[-1] = np.cos(np.pi * delay)
    return np.fft.irfft(X * ramp, n=n, axis=-1)


def save_tensor(path, arr: np.ndarray) -> None:
    """Binary dump: b'ABT1', dtype code, ndim, shape (uint64 each), raw little-endian data.

    Complex arrays are stored as complex128, everything else as float64.
    """
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        code, data = b"c", arr.astype("<c16")
    else:
        code, data = b"f", arr.astype("<f8")
    with open(path, "wb") as fh:
        fh.write(b"ABT1" + code)
        fh.write(struct.pack("<Q", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(np.ascontiguousarray(data).tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(5)
        if head[:4] != b"ABT1":
            raise ValueError(f"{path}: not a tensor dump")
        ndim = struct.unpack("<Q", fh.read(8))[0]
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        dtype = "<c16" if head[4:5] == b"c" else "<f8"
        return np.frombuffer(fh.read(), dtype=dtype).reshape(shape).copy()
