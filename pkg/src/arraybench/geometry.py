"""Microphone array geometry, far-field steering delays and angle encodings.

Coordinates are in meters. Azimuth is measured in the x-y plane from the +x
axis, elevation is positive upwards (+z).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEncodingError, InvalidGeometryError

SPEED_OF_SOUND = 343.0
SAMPLE_RATE = 16000


@dataclass(frozen=True)
class Direction:
    azimuth: float
    elevation: float

    def unit_vector(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        return np.array(
            [ce * np.cos(self.azimuth), ce * np.sin(self.azimuth), np.sin(self.elevation)]
        )

    @classmethod
    def from_vector(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise DegenerateEncodingError("zero vector has no direction")
        v = v / n
        return cls(float(np.arctan2(v[1], v[0])), float(np.arcsin(np.clip(v[2], -1.0, 1.0))))

    def degrees(self) -> tuple[float, float]:
        return float(np.degrees(self.azimuth)), float(np.degrees(self.elevation))


def angular_error(a: Direction, b: Direction) -> float:
    """Great-circle angle between two directions, in radians."""
    c = float(np.dot(a.unit_vector(), b.unit_vector()))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


@dataclass(frozen=True)
class ArrayGeometry:
    mic_positions: np.ndarray
    sample_rate: int = SAMPLE_RATE
    speed_of_sound: float = SPEED_OF_SOUND
    pairs: tuple = field(init=False)

    def __post_init__(self):
        pos = np.array(self.mic_positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidGeometryError(f"mic positions must be (M, 3), got {pos.shape}")
        if pos.shape[0] < 2:
            raise InvalidGeometryError("need at least two microphones")
        if self.sample_rate <= 0 or self.speed_of_sound <= 0:
            raise InvalidGeometryError("sample rate and speed of sound must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "mic_positions", pos)
        pairs = tuple(itertools.combinations(range(pos.shape[0]), 2))
        object.__setattr__(self, "pairs", pairs)
        if min(self.pair_distances()) <= 0:
            raise InvalidGeometryError("coincident microphones")

    @property
    def n_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    def pair_distances(self) -> np.ndarray:
        p = self.mic_positions
        return np.array([np.linalg.norm(p[i] - p[j]) for i, j in self.pairs])

    @property
    def max_distance(self) -> float:
        return float(self.pair_distances().max())

    @property
    def max_delay_samples(self) -> float:
        return self.max_distance / self.speed_of_sound * self.sample_rate

    def to_json(self) -> str:
        return json.dumps(
            {
                "mics": self.mic_positions.tolist(),
                "fs": int(self.sample_rate),
                "c": float(self.speed_of_sound),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ArrayGeometry":
        d = json.loads(text)
        return cls(np.array(d["mics"], dtype=float), int(d["fs"]), float(d["c"]))

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (
            np.array_equal(self.mic_positions, other.mic_positions)
            and self.sample_rate == other.sample_rate
            and self.speed_of_sound == other.speed_of_sound
        )

    __hash__ = None


def tetrahedral_array(
    base_radius: float = 0.05,
    apex_height: float = 0.08,
    sample_rate: int = SAMPLE_RATE,
    speed_of_sound: float = SPEED_OF_SOUND,
) -> ArrayGeometry:
    """Three mics on a horizontal circle at 0, 120 and 240 degrees plus one apex mic.

    Positions are relative to the base-circle center.
    """
    if not base_radius > 0 or not apex_height > 0:
        raise InvalidGeometryError("base_radius and apex_height must be positive")
    az = np.deg2rad([0.0, 120.0, 240.0])
    base = np.stack([base_radius * np.cos(az), base_radius * np.sin(az), np.zeros(3)], axis=1)
    pos = np.vstack([base, [0.0, 0.0, apex_height]])
    return ArrayGeometry(pos, sample_rate, speed_of_sound)


def farfield_delays(g: ArrayGeometry, d: Direction) -> np.ndarray:
    """Per-mic arrival delay in samples relative to the array centroid.

    Mics closer to the source get negative (earlier) delays.
    """
    r = g.mic_positions - g.centroid
    return -(r @ d.unit_vector()) / g.speed_of_sound * g.sample_rate


def angle_encode(d: Direction) -> np.ndarray:
    return np.array(
        [np.cos(d.azimuth), np.sin(d.azimuth), np.cos(d.elevation), np.sin(d.elevation)]
    )


def angle_decode(v) -> Direction:
    v = np.asarray(v, dtype=float)
    a, e = v[:2], v[2:4]
    na, ne = np.linalg.norm(a), np.linalg.norm(e)
    if na == 0 or ne == 0:
        raise DegenerateEncodingError("angle encoding has a zero half-vector")
    a, e = a / na, e / ne
    return Direction(float(np.arctan2(a[1], a[0])), float(np.arctan2(e[1], e[0])))
