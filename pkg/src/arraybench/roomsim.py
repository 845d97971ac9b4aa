"""Shoebox room simulation, scene sampling and SNR-controlled mixing.

RIRs come from the image source method with a uniform wall absorption
derived from the requested RT60 by inverting Sabine's formula. Each wall
reflection multiplies the image energy by ``exp(-kappa * alpha)``. The
factor ``kappa`` depends on room shape only: shoebox image energy decays as
a mixture of direction-dependent exponentials, and ``kappa`` rescales the
loss so that the Schroeder T20 slope of that mixture lands on the requested
RT60. A 50 Hz high-pass removes the DC build-up of the all-positive image
impulses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, fftconvolve, sosfilt

from ._ism import FD_TAPS, image_source_rir
from .errors import (
    DegenerateSourceError,
    InfeasibleRT60Error,
    PlacementError,
    SamplingExhaustedError,
)
from .geometry import ArrayGeometry, Direction

SABINE_CONSTANT = 0.161
CLIP_SECONDS = 4.0
NOISE_FLOOR_DB = -50.0
RIR_COVERAGE = 1.5  # RIR length as a multiple of RT60
HIGHPASS_HZ = 50.0

# Scene distribution bounds
ROOM_X = (4.0, 10.0)
ROOM_Y = (3.5, 8.0)
ROOM_Z = (2.5, 3.5)
RT60_RANGE = (0.19, 0.82)
RT60_MEAN = 0.38
TARGET_AZ_DEG = 45.0
TARGET_EL_DEG = 20.0
TARGET_DIST = (0.8, 1.5)
WALL_MARGIN_ARRAY = 0.5
WALL_MARGIN_SOURCE = 0.1
MIN_SEPARATION = 0.5
MAX_DRAWS = 10_000


@dataclass(frozen=True)
class RoomSpec:
    dimensions: tuple
    rt60: float
    max_image_order: int | None = None
    sample_rate: int = 16000

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + ly * lz + lx * lz)

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        dims = np.asarray(self.dimensions, dtype=float)
        return bool(np.all(p > margin) and np.all(p < dims - margin))

    def to_dict(self) -> dict:
        return {
            "dimensions": [float(v) for v in self.dimensions],
            "rt60": float(self.rt60),
            "max_image_order": self.max_image_order,
            "sample_rate": int(self.sample_rate),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoomSpec":
        return cls(tuple(d["dimensions"]), d["rt60"], d.get("max_image_order"), d["sample_rate"])


@dataclass(frozen=True)
class SourcePlacement:
    position: np.ndarray
    role: str
    direction_from_array: Direction
    distance: float

    @classmethod
    def at(cls, position, array_center, role: str) -> "SourcePlacement":
        position = np.asarray(position, dtype=float)
        rel = position - np.asarray(array_center, dtype=float)
        return cls(position, role, Direction.from_vector(rel), float(np.linalg.norm(rel)))

    def to_dict(self) -> dict:
        az, el = self.direction_from_array.degrees()
        return {
            "role": self.role,
            "position": [float(v) for v in self.position],
            "azimuth_deg": az,
            "elevation_deg": el,
            "distance": self.distance,
        }


@dataclass
class Rir:
    taps: np.ndarray
    direct_path_sample: np.ndarray


@dataclass
class SceneRecording:
    """Components are stored so that ``mixture`` is exactly their sum."""

    target_reverberant: np.ndarray
    interferer: np.ndarray
    noise: np.ndarray
    snr_db: float
    interferer_gain: float
    metadata: dict = field(default_factory=dict)

    @property
    def mixture(self) -> np.ndarray:
        return self.target_reverberant + self.interferer + self.noise

    @property
    def clean_reference(self) -> np.ndarray:
        return self.target_reverberant[0]


def rt60_to_absorption(room: RoomSpec, coverage: float = RIR_COVERAGE) -> tuple[float, int]:
    """Uniform absorption coefficient from Sabine's formula, plus the image order
    needed for reflections to span ``coverage * rt60`` seconds."""
    if not room.rt60 > 0:
        raise InfeasibleRT60Error("rt60 must be positive")
    if room.volume <= 0 or room.surface <= 0:
        raise InfeasibleRT60Error("room volume and surface must be positive")
    alpha = SABINE_CONSTANT * room.volume / (room.rt60 * room.surface)
    if alpha >= 1.0:
        raise InfeasibleRT60Error(
            f"rt60={room.rt60} s needs absorption {alpha:.3f} >= 1 in this room"
        )
    radius = coverage * room.rt60 * 343.0
    inv = math.sqrt(sum(1.0 / L**2 for L in room.dimensions))
    order = int(math.ceil(radius * inv)) + 3
    return alpha, order


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    phi = np.pi * (1.0 + 5.0**0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def decay_shape_factor(dimensions, n_directions: int = 2000) -> float:
    """Ratio of the direction-averaged image-source T20 decay time to Sabine's.

    Along direction u an image accrues ``sum(|u_a| / L_a)`` reflections per
    meter, so the energy decay curve is a sum of exponentials over u.
    """
    dims = np.asarray(dimensions, dtype=float)
    rates = (np.abs(_fibonacci_sphere(n_directions)) / dims).sum(axis=1)
    mean_rate = rates.mean()
    # time in units where the mean decay is exp(-t)
    t = np.linspace(0.0, 30.0, 3000)
    edc = (np.exp(-np.outer(t, rates / mean_rate)) / rates).sum(axis=1)
    edc_db = 10.0 * np.log10(edc / edc[0])
    sel = (edc_db <= -5.0) & (edc_db >= -25.0)
    slope = np.polyfit(t[sel], edc_db[sel], 1)[0]
    sabine_slope = -10.0 / math.log(10.0)
    return float(sabine_slope / slope)


def mic_positions_in_room(g: ArrayGeometry, array_center) -> np.ndarray:
    """Absolute mic coordinates with the array centroid at ``array_center``."""
    return np.asarray(array_center, dtype=float) + (g.mic_positions - g.centroid)


def simulate_rir(
    room: RoomSpec,
    src: SourcePlacement,
    g: ArrayGeometry,
    array_center,
    coverage: float = RIR_COVERAGE,
) -> Rir:
    mics = mic_positions_in_room(g, array_center)
    if not room.contains(src.position):
        raise PlacementError(f"source {src.position} outside room {room.dimensions}")
    for m in mics:
        if not room.contains(m):
            raise PlacementError(f"microphone {m} outside room {room.dimensions}")
    alpha, order = rt60_to_absorption(room, coverage)
    if room.max_image_order is not None:
        order = room.max_image_order
    if order < 0:
        raise PlacementError("max_image_order must be >= 0")
    kappa = decay_shape_factor(room.dimensions)
    beta = math.exp(-kappa * alpha / 2.0)
    fs, c = room.sample_rate, g.speed_of_sound
    dist = np.linalg.norm(mics - src.position, axis=1)
    if order == 0:
        n = int(math.ceil(dist.max() / c * fs)) + FD_TAPS
    else:
        n = int(math.ceil(coverage * room.rt60 * fs)) + FD_TAPS
    taps = image_source_rir(room.dimensions, src.position, mics, beta, order, n, fs, c)
    if order > 0:
        taps = sosfilt(butter(4, HIGHPASS_HZ, "highpass", fs=fs, output="sos"), taps, axis=1)
    return Rir(taps, dist / c * fs)


def _sample_rt60(rng: np.random.Generator) -> float:
    lo, hi = RT60_RANGE
    # Beta(2, b) on [lo, hi] with mean RT60_MEAN
    m = (RT60_MEAN - lo) / (hi - lo)
    b = 2.0 * (1.0 - m) / m
    return float(lo + (hi - lo) * rng.beta(2.0, b))


def sample_scene(seed: int):
    """Draw (room, target, interferer, array_center) from the scene distribution.

    Deterministic in ``seed``. Targets lie in the camera field of view (+x
    facing): azimuth within 45 deg, elevation within 20 deg, 0.8-1.5 m away.
    """
    rng = np.random.default_rng(seed)
    for _ in range(MAX_DRAWS):
        dims = (
            float(rng.uniform(*ROOM_X)),
            float(rng.uniform(*ROOM_Y)),
            float(rng.uniform(*ROOM_Z)),
        )
        rt60 = _sample_rt60(rng)
        room = RoomSpec(dims, rt60)
        try:
            rt60_to_absorption(room)
        except InfeasibleRT60Error:
            continue
        lo = np.full(3, WALL_MARGIN_ARRAY)
        center = rng.uniform(lo, np.asarray(dims) - lo)
        az = np.deg2rad(rng.uniform(-TARGET_AZ_DEG, TARGET_AZ_DEG))
        el = np.deg2rad(rng.uniform(-TARGET_EL_DEG, TARGET_EL_DEG))
        dist = rng.uniform(*TARGET_DIST)
        tpos = center + dist * Direction(az, el).unit_vector()
        ipos = rng.uniform(np.full(3, WALL_MARGIN_SOURCE), np.asarray(dims) - WALL_MARGIN_SOURCE)
        if not room.contains(tpos, WALL_MARGIN_SOURCE):
            continue
        if np.linalg.norm(ipos - center) < MIN_SEPARATION:
            continue
        if np.linalg.norm(ipos - tpos) < MIN_SEPARATION:
            continue
        target = SourcePlacement.at(tpos, center, "target")
        interferer = SourcePlacement.at(ipos, center, "interferer")
        return room, target, interferer, center
    raise SamplingExhaustedError(f"no valid scene after {MAX_DRAWS} draws (seed {seed})")


def convolve_source(signal: np.ndarray, rir: Rir, length: int) -> np.ndarray:
    """Multichannel image of a mono source, truncated to ``length`` samples."""
    out = fftconvolve(signal[None, :], rir.taps, axes=1)[:, :length]
    if out.shape[1] < length:
        out = np.pad(out, ((0, 0), (0, length - out.shape[1])))
    return out


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def mix_at_snr(
    target_conv: np.ndarray,
    interferer_conv: np.ndarray,
    snr_db: float,
    noise_floor_db: float | None = NOISE_FLOOR_DB,
    rng: np.random.Generator | None = None,
    ref_channel: int = 0,
) -> SceneRecording:
    """Scale the interferer to ``snr_db`` on the reference channel and add sensor noise.

    Sensor noise is white Gaussian at ``noise_floor_db`` relative to the RMS
    of the noiseless mixture (all channels pooled). ``None`` disables it.
    """
    target_conv = np.asarray(target_conv, dtype=float)
    interferer_conv = np.asarray(interferer_conv, dtype=float)
    if target_conv.shape != interferer_conv.shape:
        raise DegenerateSourceError(
            f"shape mismatch {target_conv.shape} vs {interferer_conv.shape}"
        )
    pt = _power(target_conv[ref_channel])
    pi = _power(interferer_conv[ref_channel])
    if pt <= 0:
        raise DegenerateSourceError("target is silent on the reference channel")
    if pi <= 0:
        raise DegenerateSourceError("interferer is silent on the reference channel")
    gain = math.sqrt(pt / (pi * 10.0 ** (snr_db / 10.0)))
    interferer = gain * interferer_conv
    if noise_floor_db is None:
        noise = np.zeros_like(target_conv)
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        rms = math.sqrt(_power(target_conv + interferer))
        sigma = rms * 10.0 ** (noise_floor_db / 20.0)
        noise = sigma * rng.standard_normal(target_conv.shape)
    return SceneRecording(target_conv, interferer, noise, float(snr_db), gain)


def measured_snr_db(rec: SceneRecording, ref_channel: int = 0) -> float:
    return 10.0 * math.log10(
        _power(rec.target_reverberant[ref_channel]) / _power(rec.interferer[ref_channel])
    )


def schroeder_decay(rir: np.ndarray) -> np.ndarray:
    """Energy decay curve in dB, normalized to 0 dB at t=0."""
    e = np.cumsum(np.square(rir)[::-1])[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(e / e[0])


def estimate_t60(rir: np.ndarray, fs: int, start_db: float = -5.0, stop_db: float = -25.0) -> float:
    """T60 by linear fit of the Schroeder curve between ``start_db`` and ``stop_db``."""
    edc = schroeder_decay(rir)
    onset = int(np.argmax(np.abs(rir)))
    edc = edc[onset:] - edc[onset]
    idx = np.nonzero((edc <= start_db) & (edc >= stop_db))[0]
    if len(idx) < 2:
        raise ValueError("decay range not covered by the impulse response")
    t = idx / fs
    slope, _ = np.polyfit(t, edc[idx], 1)
    return float(-60.0 / slope)
