"""Compiled image-source accumulation kernel for shoebox rooms."""

import math

import numpy as np
from numba import njit

FD_TAPS = 81


@njit(cache=True)
def _accumulate(room, src, mics, beta, max_order, n_samples, fs, c, out):
    half = FD_TAPS // 2
    lx, ly, lz = room[0], room[1], room[2]
    max_dist = n_samples / fs * c
    nxm = int(math.ceil(max_dist / (2.0 * lx))) + 1
    nym = int(math.ceil(max_dist / (2.0 * ly))) + 1
    nzm = int(math.ceil(max_dist / (2.0 * lz))) + 1
    n_mics = mics.shape[0]
    wa = math.pi / (half + 0.5)
    cos_k = np.empty(FD_TAPS)
    sin_k = np.empty(FD_TAPS)
    sign_k = np.empty(FD_TAPS)
    for j in range(FD_TAPS):
        k = j - half
        cos_k[j] = math.cos(wa * k)
        sin_k[j] = math.sin(wa * k)
        sign_k[j] = 1.0 if k % 2 == 0 else -1.0
    for nx in range(-nxm, nxm + 1):
        for px in range(2):
            ix = 2.0 * nx * lx + (1 - 2 * px) * src[0]
            rx = abs(nx - px) + abs(nx)
            if rx > max_order:
                continue
            for ny in range(-nym, nym + 1):
                for py in range(2):
                    iy = 2.0 * ny * ly + (1 - 2 * py) * src[1]
                    ry = rx + abs(ny - py) + abs(ny)
                    if ry > max_order:
                        continue
                    for nz in range(-nzm, nzm + 1):
                        for pz in range(2):
                            iz = 2.0 * nz * lz + (1 - 2 * pz) * src[2]
                            order = ry + abs(nz - pz) + abs(nz)
                            if order > max_order:
                                continue
                            gain = beta ** order
                            for m in range(n_mics):
                                dx = ix - mics[m, 0]
                                dy = iy - mics[m, 1]
                                dz = iz - mics[m, 2]
                                d = math.sqrt(dx * dx + dy * dy + dz * dz)
                                if d > max_dist:
                                    continue
                                t = d / c * fs
                                amp = gain / (4.0 * math.pi * d)
                                n0 = int(math.floor(t))
                                frac = t - n0
                                # sin(pi (k - frac)) = -(-1)^k sin(pi frac)
                                sf = math.sin(math.pi * frac)
                                ca = math.cos(wa * frac)
                                sa = math.sin(wa * frac)
                                for j in range(FD_TAPS):
                                    k = j - half
                                    n = n0 + k
                                    if n < 0 or n >= n_samples:
                                        continue
                                    x = k - frac
                                    if abs(x) >= half + 0.5:
                                        continue
                                    w = 0.5 * (1.0 + cos_k[j] * ca + sin_k[j] * sa)
                                    if abs(x) < 1e-12:
                                        s = 1.0
                                    else:
                                        s = -sign_k[j] * sf / (math.pi * x)
                                    out[m, n] += amp * w * s


def image_source_rir(room_dims, src, mics, beta, max_order, n_samples, fs, c):
    """Sum of windowed-sinc delayed impulses over all shoebox images.

    ``beta`` is the per-reflection amplitude factor. Images later than
    ``n_samples`` or with more than ``max_order`` reflections are dropped.
    """
    out = np.zeros((len(mics), n_samples))
    _accumulate(
        np.asarray(room_dims, dtype=np.float64),
        np.asarray(src, dtype=np.float64),
        np.ascontiguousarray(mics, dtype=np.float64),
        float(beta),
        int(max_order),
        int(n_samples),
        float(fs),
        float(c),
        out,
    )
    return out
