"""Separation metrics and SNR-stratified aggregation.

SI-SDR follows the usual scale-invariant definition. SDR/SAR use a single
reference: the estimate is projected onto delayed copies of the reference,
so there is no interference subspace and SDR equals SAR. STOI is the
standard short-time objective intelligibility measure (Taal et al.).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_toeplitz
from scipy.signal import fftconvolve, resample_poly

from .errors import OutOfRangeError, UndefinedMetricError

DB_CAP = 100.0
BSS_FILTER_TAPS = 512
SNR_BINS = ((-1.0, 1.0), (1.0, 3.0), (3.0, 5.0), (5.0, 7.0), (7.0, 10.0))
METRIC_NAMES = ("si_sdr", "si_sdri", "sdr", "sar", "stoi")


def _ratio_db(num: float, den: float) -> float:
    if den <= num * 10.0 ** (-DB_CAP / 10.0):
        return DB_CAP
    return min(DB_CAP, 10.0 * math.log10(num / den))


def _check_pair(reference, estimate):
    s = np.asarray(reference, dtype=float)
    e = np.asarray(estimate, dtype=float)
    if s.shape != e.shape or s.ndim != 1:
        raise ValueError(f"reference {s.shape} and estimate {e.shape} must be equal-length 1-D")
    if not np.any(s):
        raise UndefinedMetricError("reference signal has zero energy")
    return s, e


def _inner(a, b) -> float:
    # pairwise summation: unlike BLAS dot, independent of memory alignment
    return float(np.sum(a * b))


def si_sdr(reference, estimate) -> float:
    s, e = _check_pair(reference, estimate)
    alpha = _inner(e, s) / _inner(s, s)
    target = alpha * s
    residual = target - e
    return _ratio_db(_inner(target, target), _inner(residual, residual))


def bss_eval_single(reference, estimate, filter_taps: int = BSS_FILTER_TAPS) -> tuple[float, float]:
    """(SDR, SAR) allowing a ``filter_taps``-long distortion filter on the reference."""
    s, e = _check_pair(reference, estimate)
    if filter_taps < 1:
        raise ValueError("filter_taps must be >= 1")
    L = filter_taps
    n = len(s)
    # Gram matrix of delayed reference copies is Toeplitz in the autocorrelation
    auto = fftconvolve(s, s[::-1])[n - 1 : n - 1 + L]
    e_ext = np.concatenate([e, np.zeros(L - 1)])
    cross = fftconvolve(e_ext, s[::-1])[n - 1 : n - 1 + L]
    try:
        coef = solve_toeplitz(auto, cross)
        if not np.all(np.isfinite(coef)):
            raise LinAlgError("non-finite solution")
    except (LinAlgError, ValueError):
        warnings.warn("singular normal equations in bss_eval_single; regularizing", RuntimeWarning)
        reg = auto.copy()
        reg[0] += 1e-10 * auto[0]
        coef = solve_toeplitz(reg, cross)
    s_target = fftconvolve(s, coef)[: n + L - 1]
    e_artif = e_ext - s_target
    num = _inner(s_target, s_target)
    den = _inner(e_artif, e_artif)
    sdr = _ratio_db(num, den)
    # no interference or noise subspace: SAR uses the same terms
    sar = _ratio_db(num, den)
    return sdr, sar


# STOI constants
STOI_FS = 10000
STOI_FRAME = 256
STOI_NFFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ = 150.0
STOI_SEGMENT = 30
STOI_BETA = -15.0
STOI_DYN_RANGE = 40.0
_EPS = np.finfo(float).eps


def _third_octave_matrix(fs=STOI_FS, nfft=STOI_NFFT, bands=STOI_BANDS, min_freq=STOI_MIN_FREQ):
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(bands, dtype=float)
    lo = min_freq * 2.0 ** ((2 * k - 1) / 6)
    hi = min_freq * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((bands, len(f)))
    for i in range(bands):
        a = int(np.argmin((f - lo[i]) ** 2))
        b = int(np.argmin((f - hi[i]) ** 2))
        obm[i, a:b] = 1.0
    return obm


_OBM = _third_octave_matrix()


def _frames(x, framelen, hop):
    w = np.hanning(framelen + 2)[1:-1]
    idx = range(0, len(x) - framelen, hop)
    return np.array([w * x[i : i + framelen] for i in idx])


def _overlap_add(frames, hop):
    n_frames, framelen = frames.shape
    out = np.zeros((n_frames - 1) * hop + framelen)
    for i in range(n_frames):
        out[i * hop : i * hop + framelen] += frames[i]
    return out


def _remove_silent_frames(x, y):
    hop = STOI_FRAME // 2
    xf = _frames(x, STOI_FRAME, hop)
    yf = _frames(y, STOI_FRAME, hop)
    energy = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + _EPS)
    keep = (energy.max() - STOI_DYN_RANGE - energy) < 0
    return _overlap_add(xf[keep], hop), _overlap_add(yf[keep], hop)


def stoi(reference, estimate, fs: int = 16000) -> float:
    s, e = _check_pair(reference, estimate)
    if fs != STOI_FS:
        g = math.gcd(int(fs), STOI_FS)
        s = resample_poly(s, STOI_FS // g, int(fs) // g)
        e = resample_poly(e, STOI_FS // g, int(fs) // g)
    s, e = _remove_silent_frames(s, e)
    hop = STOI_FRAME // 2
    if len(s) < STOI_FRAME + hop:
        raise UndefinedMetricError("reference has too little active speech for STOI")
    X = np.fft.rfft(_frames(s, STOI_FRAME, hop), n=STOI_NFFT).T
    Y = np.fft.rfft(_frames(e, STOI_FRAME, hop), n=STOI_NFFT).T
    x_tob = np.sqrt(_OBM @ np.abs(X) ** 2)
    y_tob = np.sqrt(_OBM @ np.abs(Y) ** 2)
    n_frames = x_tob.shape[1]
    if n_frames < STOI_SEGMENT:
        raise UndefinedMetricError(
            f"STOI needs {STOI_SEGMENT} active frames (~386 ms), got {n_frames}"
        )
    segs_x = np.array([x_tob[:, m - STOI_SEGMENT : m] for m in range(STOI_SEGMENT, n_frames + 1)])
    segs_y = np.array([y_tob[:, m - STOI_SEGMENT : m] for m in range(STOI_SEGMENT, n_frames + 1)])
    scale = np.linalg.norm(segs_x, axis=2, keepdims=True) / (
        np.linalg.norm(segs_y, axis=2, keepdims=True) + _EPS
    )
    clip = 10.0 ** (-STOI_BETA / 20.0)
    y_prime = np.minimum(segs_y * scale, segs_x * (1.0 + clip))
    xc = segs_x - segs_x.mean(axis=2, keepdims=True)
    yc = y_prime - y_prime.mean(axis=2, keepdims=True)
    xc /= np.linalg.norm(xc, axis=2, keepdims=True) + _EPS
    yc /= np.linalg.norm(yc, axis=2, keepdims=True) + _EPS
    return float(np.sum(xc * yc) / (segs_x.shape[0] * segs_x.shape[1]))


def snr_bin(snr_db: float) -> str:
    """Label of the half-open SNR bin holding ``snr_db`` (the last bin is closed)."""
    if not (SNR_BINS[0][0] <= snr_db <= SNR_BINS[-1][1]):
        raise OutOfRangeError(f"SNR {snr_db} dB outside [-1, 10]")
    for i, (lo, hi) in enumerate(SNR_BINS):
        last = i == len(SNR_BINS) - 1
        if lo <= snr_db < hi or (last and snr_db == hi):
            return bin_label(i)
    raise OutOfRangeError(f"SNR {snr_db} dB not binned")


def bin_label(i: int) -> str:
    lo, hi = SNR_BINS[i]
    close = "]" if i == len(SNR_BINS) - 1 else ")"
    return f"[{lo:g},{hi:g}{close}"


@dataclass
class MetricsReport:
    si_sdr: float
    si_sdri: float
    sdr: float
    sar: float
    stoi: float
    snr_db: float
    snr_bin: str | None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(reference, estimate, mixture_ref, snr_db: float, fs: int = 16000) -> MetricsReport:
    """All metrics of ``estimate`` against ``reference``; SI-SDRi is relative to ``mixture_ref``."""
    value = si_sdr(reference, estimate)
    base = si_sdr(reference, mixture_ref)
    sdr, sar = bss_eval_single(reference, estimate)
    try:
        label = snr_bin(snr_db)
    except OutOfRangeError:
        label = None
    return MetricsReport(
        si_sdr=value,
        si_sdri=value - base,
        sdr=sdr,
        sar=sar,
        stoi=stoi(reference, estimate, fs),
        snr_db=float(snr_db),
        snr_bin=label,
    )


def _summary(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "std": float(a.std()), "count": int(a.size)}


def stratify(reports, snr_db=None) -> dict:
    """Per-bin and overall mean/std/count of every metric.

    ``snr_db`` defaults to each report's own ``snr_db``. Every SNR must lie
    in [-1, 10].
    """
    reports = list(reports)
    if not reports:
        return {"overall": {}, "bins": {}}
    snrs = [r.snr_db for r in reports] if snr_db is None else list(snr_db)
    labels = [snr_bin(v) for v in snrs]
    bins = {}
    for i in range(len(SNR_BINS)):
        label = bin_label(i)
        members = [r for r, lab in zip(reports, labels) if lab == label]
        entry = {"count": len(members)}
        for name in METRIC_NAMES:
            if members:
                s = _summary([getattr(r, name) for r in members])
                entry[name] = {"mean": s["mean"], "std": s["std"]}
        bins[label] = entry
    overall = {"count": len(reports)}
    for name in METRIC_NAMES:
        s = _summary([getattr(r, name) for r in reports])
        overall[name] = {"mean": s["mean"], "std": s["std"]}
    return {"overall": overall, "bins": bins}
