import numpy as np
import pytest

from arraybench.geometry import Direction, tetrahedral_array
from arraybench.roomsim import RoomSpec, SourcePlacement, convolve_source, simulate_rir
from arraybench.sources import synthetic_speech

FS = 16000


@pytest.fixture(scope="session")
def tetra():
    return tetrahedral_array(0.05, 0.08, FS, 343.0)


@pytest.fixture(scope="session")
def speech():
    return synthetic_speech(11, 4.0, FS)


@pytest.fixture(scope="session")
def speech2():
    return synthetic_speech(12, 4.0, FS)


def anechoic_scene(g, direction: Direction, distance: float, signal, center=(3.0, 3.0, 1.5)):
    """Order-0 simulation of ``signal`` arriving from ``direction`` at ``distance``."""
    center = np.asarray(center, dtype=float)
    room = RoomSpec((8.0, 7.0, 3.4), 0.3, max_image_order=0)
    pos = center + distance * direction.unit_vector()
    src = SourcePlacement.at(pos, center, "target")
    rir = simulate_rir(room, src, g, center)
    return convolve_source(signal, rir, len(signal)), rir, src


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
