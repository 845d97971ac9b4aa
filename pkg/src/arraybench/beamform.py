"""Far-field steered delay-and-sum and MVDR beamformers."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig, fractional_delay, istft, stft
from .errors import SolverError
from .geometry import ArrayGeometry, Direction, farfield_delays

DEFAULT_LOADING = 1e-3
UNDERDETERMINED_LOADING = 1e-1


def steering_delays(g: ArrayGeometry, d: Direction, reference: int | None = None) -> np.ndarray:
    """Far-field delays in samples, relative to the centroid or to mic ``reference``."""
    tau = farfield_delays(g, d)
    if reference is not None:
        tau = tau - tau[reference]
    return tau


def das(x, g: ArrayGeometry, d: Direction, reference: int | None = None) -> np.ndarray:
    """Advance every channel by its steering delay and average with weights 1/M."""
    x = np.asarray(x, dtype=float)
    tau = steering_delays(g, d, reference)
    aligned = [fractional_delay(x[m], -tau[m]) for m in range(x.shape[0])]
    return np.mean(aligned, axis=0)


def steering_vector(
    g: ArrayGeometry, d: Direction, freqs: np.ndarray, reference: int | None = None
) -> np.ndarray:
    """Array manifold exp(-j 2 pi f tau_m), shape (bins, M)."""
    tau = steering_delays(g, d, reference) / g.sample_rate
    return np.exp(-2j * np.pi * np.outer(freqs, tau))


@dataclass
class SpatialCovariance:
    """Per-bin covariance matrices, shape (bins, M, M)."""

    matrices: np.ndarray
    n_frames: int
    loading: float

    def condition_numbers(self) -> np.ndarray:
        return np.linalg.cond(self.matrices)


def estimate_covariance(S: ComplexSpectrogram, loading: float = DEFAULT_LOADING) -> SpatialCovariance:
    """Sample covariance per frequency plus ``loading * tr(R)/M`` on the diagonal."""
    X = S.data  # (M, F, T)
    m, _, t = X.shape
    if t < m:
        warnings.warn(
            f"only {t} frames for {m} channels; covariance is rank deficient, "
            f"raising diagonal loading to {UNDERDETERMINED_LOADING}",
            RuntimeWarning,
            stacklevel=2,
        )
        loading = max(loading, UNDERDETERMINED_LOADING)
    R = np.einsum("mft,nft->fmn", X, X.conj()) / t
    R = 0.5 * (R + R.conj().transpose(0, 2, 1))
    tr = np.real(np.trace(R, axis1=1, axis2=2))
    floor = np.where(tr > 0, tr, 1.0)
    R = R + (loading * floor / m)[:, None, None] * np.eye(m)[None]
    return SpatialCovariance(R, t, loading)


def mvdr_weights(R: SpatialCovariance, steering: np.ndarray) -> np.ndarray:
    """w(f) = R^-1 d / (d^H R^-1 d), shape (bins, M)."""
    weights = np.empty_like(steering)
    for f in range(steering.shape[0]):
        d = steering[f]
        try:
            rinv_d = np.linalg.solve(R.matrices[f], d)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular covariance at bin {f}", freq_index=f) from exc
        den = np.vdot(d, rinv_d)
        if not np.isfinite(den) or abs(den) < 1e-300:
            raise SolverError(f"degenerate MVDR denominator at bin {f}", freq_index=f)
        weights[f] = rinv_d / den
    return weights


def apply_weights(S: ComplexSpectrogram, w: np.ndarray) -> ComplexSpectrogram:
    """Y(f,t) = w(f)^H X(f,t)."""
    y = np.einsum("fm,mft->ft", w.conj(), S.data)
    return ComplexSpectrogram(y[None], S.config, S.length)


def mvdr(S: ComplexSpectrogram, steering: np.ndarray, R: SpatialCovariance) -> np.ndarray:
    w = mvdr_weights(R, steering)
    return istft(apply_weights(S, w))[0]


def mvdr_beamform(
    x,
    g: ArrayGeometry,
    d: Direction,
    cfg: StftConfig = StftConfig(),
    loading: float = DEFAULT_LOADING,
    reference: int | None = None,
    noise=None,
) -> np.ndarray:
    """MVDR from waveforms.

    The covariance comes from the mixture itself unless ``noise`` (an
    interference-plus-noise waveform with the same shape) is passed.
    """
    S = stft(x, cfg)
    R = estimate_covariance(stft(noise, cfg) if noise is not None else S, loading)
    return mvdr(S, steering_vector(g, d, cfg.frequencies(), reference), R)
