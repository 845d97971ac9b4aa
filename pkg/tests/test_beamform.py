import math
import warnings

import numpy as np
import pytest

from arraybench.beamform import (
    apply_weights,
    das,
    estimate_covariance,
    mvdr_beamform,
    mvdr_weights,
    SpatialCovariance,
    steering_delays,
    steering_vector,
)
from arraybench.dsp import StftConfig, fractional_delay, stft
from arraybench.geometry import Direction
from arraybench.metrics import si_sdr

CFG = StftConfig()


def _no_nyquist(s):
    # a real fractional delay cannot preserve the Nyquist bin; drop it for exact tests
    S = np.fft.rfft(s)
    S[-1] = 0.0
    return np.fft.irfft(S, n=len(s))


def _plane_wave(g, d, s):
    tau = steering_delays(g, d)
    return np.array([fractional_delay(s, t) for t in tau])


def test_das_identity_on_plane_wave(tetra, speech):
    d = Direction(0.4, -0.2)
    s = _no_nyquist(speech)
    x = _plane_wave(tetra, d, s)
    np.testing.assert_allclose(das(x, tetra, d), s, atol=1e-9)


def test_das_reference_mic(tetra, speech):
    d = Direction(-0.3, 0.1)
    x = _plane_wave(tetra, d, _no_nyquist(speech))
    assert steering_delays(tetra, d, 0)[0] == 0.0
    np.testing.assert_allclose(das(x, tetra, d, reference=0), x[0], atol=1e-9)


def test_das_white_noise_gain(tetra, speech):
    rng = np.random.default_rng(0)
    d = Direction(0.2, 0.1)
    clean = _plane_wave(tetra, d, speech)
    noise = rng.standard_normal(clean.shape)
    y = das(clean + noise, tetra, d)
    gain = si_sdr(speech, y) - si_sdr(clean[0], clean[0] + noise[0])
    # 10 log10(4)
    assert gain == pytest.approx(6.02, abs=0.5)


def test_steering_vector_unit_modulus(tetra):
    v = steering_vector(tetra, Direction(0.1, 0.2), CFG.frequencies())
    assert v.shape == (257, 4)
    np.testing.assert_allclose(np.abs(v), 1.0)
    np.testing.assert_allclose(v[0], 1.0)


def test_covariance_hermitian_pd(speech):
    rng = np.random.default_rng(1)
    S = stft(rng.standard_normal((4, 16000)))
    R = estimate_covariance(S)
    np.testing.assert_allclose(R.matrices, R.matrices.conj().transpose(0, 2, 1), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(R.matrices) > 0)
    assert np.all(np.isfinite(R.condition_numbers()))


def test_covariance_white_noise_monte_carlo():
    rng = np.random.default_rng(2)
    S = stft(rng.standard_normal((4, 64000)))
    # averaged over bins the estimate approaches sigma^2 I
    R = estimate_covariance(S, loading=0.0).matrices[20:230].mean(axis=0)
    sigma2 = np.real(np.trace(R)) / 4
    np.testing.assert_allclose(R / sigma2, np.eye(4), atol=0.02)


def test_mvdr_identity_cov_equals_das_weights(tetra):
    v = steering_vector(tetra, Direction(0.3, 0.0), CFG.frequencies())
    R = SpatialCovariance(np.tile(np.eye(4, dtype=complex), (257, 1, 1)), 100, 0.0)
    np.testing.assert_allclose(mvdr_weights(R, v), v / 4, atol=1e-12)


def test_mvdr_distortionless(tetra):
    rng = np.random.default_rng(3)
    S = stft(rng.standard_normal((4, 16000)))
    v = steering_vector(tetra, Direction(-0.5, 0.2), CFG.frequencies())
    w = mvdr_weights(estimate_covariance(S), v)
    np.testing.assert_allclose(np.einsum("fm,fm->f", w.conj(), v), 1.0, atol=1e-9)


def test_mvdr_power_not_above_das(tetra):
    rng = np.random.default_rng(4)
    mix = rng.standard_normal((4, 16000))
    mix[1] += 0.8 * mix[0]
    S = stft(mix)
    R = estimate_covariance(S, loading=0.0)
    v = steering_vector(tetra, Direction(0.1, 0.0), CFG.frequencies())
    w_mvdr = mvdr_weights(R, v)
    w_das = v / 4
    p = lambda w: np.real(np.einsum("fm,fmn,fn->f", w.conj(), R.matrices, w))
    assert np.all(p(w_mvdr) <= p(w_das) + 1e-9)


def test_apply_weights_linear(tetra):
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal((2, 4, 4000))
    w = steering_vector(tetra, Direction(0, 0), CFG.frequencies()) / 4
    ya = apply_weights(stft(a), w).data
    yb = apply_weights(stft(b), w).data
    np.testing.assert_allclose(apply_weights(stft(a + 3 * b), w).data, ya + 3 * yb, atol=1e-9)


def test_mvdr_plane_wave_passes(tetra, speech):
    d = Direction(0.4, 0.1)
    x = _plane_wave(tetra, d, speech)
    noise = 0.1 * np.random.default_rng(7).standard_normal(x.shape)
    y = mvdr_beamform(x, tetra, d, noise=noise)
    assert si_sdr(speech, y) > 40


def test_underdetermined_warning(tetra):
    x = np.random.default_rng(6).standard_normal((4, 512))
    S = stft(x)
    S.data = S.data[:, :, :2]
    with pytest.warns(RuntimeWarning):
        R = estimate_covariance(S)
    assert R.loading == pytest.approx(0.1)
