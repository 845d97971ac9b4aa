"""GCC-PHAT delay features, TDOA peak picking and least-squares DOA.

Lag convention: for a pair (i, j), if ``x_j(t) = x_i(t - D)`` the
correlation peaks at lag +D, i.e. positive lags mean mic j hears the
wavefront after mic i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError, SingularGeometryError
from .geometry import ArrayGeometry, Direction

PHAT_EPS = 1e-8


def gcc_phat(xi, xj, eps: float = PHAT_EPS, n_fft: int | None = None) -> np.ndarray:
    """Phase-transform weighted cross-correlation over all circular lags.

    Index k of the result holds lag k (negative lags wrap to the end), the
    same layout as ``np.fft.ifft``.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    if xi.shape != xj.shape:
        raise ValueError("gcc_phat needs equal-length inputs")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not np.any(xi) or not np.any(xj):
        raise DegenerateSignalError("zero-energy input to gcc_phat")
    n = n_fft or xi.shape[-1]
    Xi = np.fft.rfft(xi, n=n)
    Xj = np.fft.rfft(xj, n=n)
    cross = Xj * np.conj(Xi)
    return np.fft.irfft(cross / (np.abs(cross) + eps), n=n)


def gcc_phat_framed(xi, xj, frame: int = 4096, hop: int = 2048, eps: float = PHAT_EPS):
    """Average of per-frame GCC-PHAT functions (length ``frame``)."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    acc = np.zeros(frame)
    count = 0
    for start in range(0, len(xi) - frame + 1, hop):
        a, b = xi[start : start + frame], xj[start : start + frame]
        if not np.any(a) or not np.any(b):
            continue
        acc += gcc_phat(a, b, eps)
        count += 1
    if count == 0:
        raise DegenerateSignalError("no frame with energy on both channels")
    return acc / count


def central_lags(r: np.ndarray, bins: int) -> np.ndarray:
    """Slice lags -bins/2 ... bins/2 - 1 out of a circular correlation."""
    half = bins // 2
    return np.concatenate([r[-half:], r[:half]])


@dataclass
class GccFeatures:
    values: np.ndarray
    pairs: tuple
    max_delay_samples: float

    @property
    def bins(self) -> int:
        return self.values.shape[1]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.bins) - self.bins // 2

    def to_json(self) -> str:
        return json.dumps(
            {
                "pairs": [list(p) for p in self.pairs],
                "lags": self.lags.tolist(),
                "values": self.values.tolist(),
            }
        )


@dataclass
class TdoaSet:
    pairs: tuple
    delays: np.ndarray
    confidence: np.ndarray


def gcc_features(x, g: ArrayGeometry, bins: int = 64, framed: bool = False) -> GccFeatures:
    x = np.asarray(x, dtype=float)
    if bins % 2:
        raise ValueError("bins must be even")
    if x.shape[0] != g.n_mics:
        raise ValueError(f"expected {g.n_mics} channels, got {x.shape[0]}")
    rows = []
    for i, j in g.pairs:
        r = gcc_phat_framed(x[i], x[j]) if framed else gcc_phat(x[i], x[j])
        rows.append(central_lags(r, bins))
    return GccFeatures(np.array(rows), g.pairs, g.max_delay_samples)


def _parabolic(y_m, y_0, y_p) -> float:
    den = y_m - 2.0 * y_0 + y_p
    if den == 0:
        return 0.0
    return float(np.clip(0.5 * (y_m - y_p) / den, -0.5, 0.5))


def estimate_tdoas(f: GccFeatures) -> TdoaSet:
    """Per-pair argmax within the physically feasible lags, refined parabolically.

    Ties go to the smallest absolute lag.
    """
    lags = f.lags
    limit = math.ceil(f.max_delay_samples) + 1
    feasible = np.nonzero(np.abs(lags) <= limit)[0]
    # stable sort by |lag| so argmax picks the smallest |lag| on ties
    order = feasible[np.argsort(np.abs(lags[feasible]), kind="stable")]
    delays, conf = [], []
    for row in f.values:
        k = order[int(np.argmax(row[order]))]
        off = 0.0
        if 0 < k < len(row) - 1:
            off = _parabolic(row[k - 1], row[k], row[k + 1])
        delays.append(lags[k] + off)
        conf.append(row[k])
    return TdoaSet(f.pairs, np.array(delays), np.array(conf))


def tdoa_from_positions(g: ArrayGeometry, mics_abs, source) -> np.ndarray:
    """Exact (near-field) per-pair delay in samples, j relative to i."""
    d = np.linalg.norm(np.asarray(mics_abs) - np.asarray(source), axis=1)
    t = d / g.speed_of_sound * g.sample_rate
    return np.array([t[j] - t[i] for i, j in g.pairs])


def tdoa_from_direction(g: ArrayGeometry, d: Direction) -> np.ndarray:
    from .geometry import farfield_delays

    t = farfield_delays(g, d)
    return np.array([t[j] - t[i] for i, j in g.pairs])


@dataclass
class DoaEstimate:
    direction: Direction | None
    residual: float
    vector: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.direction is None


def doa_least_squares(t: TdoaSet, g: ArrayGeometry) -> DoaEstimate:
    """Solve ``delay_ij = (r_i - r_j) . u / c * fs`` for u in the least-squares sense.

    The solution is normalized to a unit vector. An all-zero solution has no
    direction; it is returned with ``direction=None`` and infinite residual.
    """
    p = g.mic_positions
    A = np.array([(p[i] - p[j]) / g.speed_of_sound * g.sample_rate for i, j in t.pairs])
    if np.linalg.matrix_rank(A) < 3:
        raise SingularGeometryError("baselines do not span three dimensions")
    u, *_ = np.linalg.lstsq(A, np.asarray(t.delays, dtype=float), rcond=None)
    n = np.linalg.norm(u)
    if n < 1e-12:
        return DoaEstimate(None, math.inf, u)
    u_hat = u / n
    residual = float(np.linalg.norm(A @ u_hat - t.delays))
    return DoaEstimate(Direction.from_vector(u_hat), residual, u_hat)
