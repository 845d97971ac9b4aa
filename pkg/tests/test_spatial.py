import math

import numpy as np
import pytest
from scipy.signal import lfilter

from arraybench.errors import DegenerateSignalError, SingularGeometryError
from arraybench.geometry import ArrayGeometry, Direction, angular_error
from arraybench.spatial import (
    GccFeatures,
    TdoaSet,
    central_lags,
    doa_least_squares,
    estimate_tdoas,
    gcc_features,
    gcc_phat,
    tdoa_from_direction,
)
from conftest import anechoic_scene


def _noise(n=8192, seed=0):
    return np.random.default_rng(seed).standard_normal(n)


def test_integer_shift_peak():
    x = _noise()
    r = gcc_phat(x, np.roll(x, 3))
    assert int(np.argmax(r)) == 3
    r = gcc_phat(x, np.roll(x, -2))
    assert int(np.argmax(r)) == len(x) - 2


def test_fractional_shift_estimate(tetra):
    from arraybench.dsp import fractional_delay

    x = _noise()
    f = GccFeatures(central_lags(gcc_phat(x, fractional_delay(x, 2.5)), 64)[None], ((0, 1),), 4.4)
    assert estimate_tdoas(f).delays[0] == pytest.approx(2.5, abs=0.2)


def test_whitening_invariance():
    # a common circular coloring filter leaves the PHAT correlation unchanged
    x = _noise()
    y = np.roll(x, 4)
    H = np.fft.rfft(lfilter([1.0, 0.6, 0.2], [1.0], np.r_[1.0, np.zeros(len(x) - 1)]))
    col = lambda s: np.fft.irfft(np.fft.rfft(s) * H, n=len(s))
    np.testing.assert_allclose(gcc_phat(col(x), col(y)), gcc_phat(x, y), atol=1e-6)


def test_antisymmetry():
    x, y = _noise(seed=1), _noise(seed=2)
    r_ij = gcc_phat(x, y)
    r_ji = gcc_phat(y, x)
    np.testing.assert_allclose(r_ji, np.roll(r_ij[::-1], 1), atol=1e-12)


def test_degenerate_input():
    with pytest.raises(DegenerateSignalError):
        gcc_phat(np.zeros(100), np.ones(100))


def test_feature_shapes_and_subset(tetra, speech):
    x, _, _ = anechoic_scene(tetra, Direction(0.3, 0.1), 1.2, speech)
    f64 = gcc_features(x, tetra, 64)
    f16 = gcc_features(x, tetra, 16)
    assert f64.values.shape == (6, 64)
    assert f64.lags[0] == -32 and f64.lags[-1] == 31
    np.testing.assert_array_equal(f16.values, f64.values[:, 24:40])


def test_odd_bins_rejected(tetra):
    with pytest.raises(ValueError):
        gcc_features(np.ones((4, 1024)), tetra, 15)


def test_tie_goes_to_smallest_lag():
    row = np.zeros(64)
    row[32 + 2] = 1.0
    row[32 - 2] = 1.0
    row[32 + 1] = 0.3
    row[32 - 1] = 0.3
    t = estimate_tdoas(GccFeatures(row[None], ((0, 1),), 4.4))
    # equal peaks at -2 and +2: the first in |lag| order wins, refinement stays near it
    assert abs(t.delays[0]) == pytest.approx(2.0, abs=0.5)
    row2 = np.zeros(64)
    row2[32 + 10] = 5.0  # infeasible lag is ignored
    row2[32 + 1] = 1.0
    assert estimate_tdoas(GccFeatures(row2[None], ((0, 1),), 4.4)).delays[0] == pytest.approx(1.0, abs=0.5)


def test_anechoic_tdoa_and_doa(tetra, speech):
    d = Direction(math.radians(20), math.radians(-10))
    x, _, src = anechoic_scene(tetra, d, 1.4, speech)
    t = estimate_tdoas(gcc_features(x, tetra))
    np.testing.assert_allclose(t.delays, tdoa_from_direction(tetra, d), atol=0.5)
    est = doa_least_squares(t, tetra)
    assert not est.degenerate
    assert math.degrees(angular_error(est.direction, d)) <= 5.0


def test_ls_exact_round_trip(tetra):
    for az, el in [(0.0, 0.0), (0.7, 0.3), (-2.0, -0.5), (3.0, 1.2)]:
        d = Direction(az, el)
        est = doa_least_squares(TdoaSet(tetra.pairs, tdoa_from_direction(tetra, d), np.ones(6)), tetra)
        assert math.degrees(angular_error(est.direction, d)) < 1e-6
        assert est.residual < 1e-9


def test_ls_degenerate_zero_delays(tetra):
    est = doa_least_squares(TdoaSet(tetra.pairs, np.zeros(6), np.ones(6)), tetra)
    assert est.degenerate and math.isinf(est.residual)


def test_ls_singular_geometry():
    g = ArrayGeometry(np.array([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0], [0.1, 0.1, 0.0]]))
    with pytest.raises(SingularGeometryError):
        doa_least_squares(TdoaSet(g.pairs, np.zeros(6), np.ones(6)), g)


def test_features_json(tetra, speech):
    import json

    x, _, _ = anechoic_scene(tetra, Direction(0, 0), 1.0, speech)
    d = json.loads(gcc_features(x, tetra, 16).to_json())
    assert len(d["pairs"]) == 6 and d["lags"][0] == -8 and len(d["values"][0]) == 16
