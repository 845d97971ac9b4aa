"""Oracle time-frequency masks and reference-phase reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, istft
from .errors import AlignmentError


@dataclass
class MagnitudeMask:
    values: np.ndarray  # (bins, frames)
    reference_channel: int = 0
    mask_max: float = 1.0


def _ref_plane(S, channel: int = 0) -> np.ndarray:
    data = S.data if isinstance(S, ComplexSpectrogram) else np.asarray(S)
    if data.ndim == 3:
        data = data[channel]
    return data


def _aligned(target, mixture, channel: int):
    s = _ref_plane(target, channel)
    x = _ref_plane(mixture, channel)
    if s.shape != x.shape:
        raise AlignmentError(f"target {s.shape} and mixture {x.shape} spectrograms differ")
    return s, x


def ideal_ratio_mask(S_target, X_mix, exponent: int = 1, channel: int = 0) -> MagnitudeMask:
    """|S|^p / (|S|^p + |X - S|^p), clipped to [0, 1]."""
    if exponent not in (1, 2):
        raise ValueError("exponent must be 1 or 2")
    s, x = _aligned(S_target, X_mix, channel)
    num = np.abs(s) ** exponent
    den = num + np.abs(x - s) ** exponent
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.where(den > 0, num / den, 0.0)
    return MagnitudeMask(np.clip(m, 0.0, 1.0), channel)


def ideal_binary_mask(S_target, X_mix, threshold_db: float = 0.0, channel: int = 0) -> MagnitudeMask:
    """1 where the target-to-residual ratio reaches ``threshold_db``."""
    s, x = _aligned(S_target, X_mix, channel)
    ps = np.abs(s) ** 2
    pr = np.abs(x - s) ** 2
    if threshold_db == -np.inf:
        return MagnitudeMask(np.ones(ps.shape), channel)
    if threshold_db == np.inf:
        return MagnitudeMask(np.zeros(ps.shape), channel)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = 10.0 * np.log10(ps / pr)
    ratio = np.where(np.isnan(ratio), -np.inf, ratio)
    return MagnitudeMask((ratio >= threshold_db).astype(float), channel)


def masked_spectrogram(m: MagnitudeMask, X_ref) -> np.ndarray:
    """Mask times reference magnitude, with the reference phase."""
    x = _ref_plane(X_ref, m.reference_channel)
    if m.values.shape != x.shape:
        raise AlignmentError(f"mask {m.values.shape} and reference {x.shape} differ")
    return m.values * np.abs(x) * np.exp(1j * np.angle(x))


def apply_mask(m: MagnitudeMask, X_ref: ComplexSpectrogram) -> np.ndarray:
    est = masked_spectrogram(m, X_ref)
    return istft(ComplexSpectrogram(est[None], X_ref.config, X_ref.length))[0]
