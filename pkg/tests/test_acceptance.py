"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the
terminal summary under "acceptance".
"""

import math

import numpy as np
import pytest

from arraybench import corpus
from arraybench.beamform import estimate_covariance, mvdr_weights, steering_delays, steering_vector, das
from arraybench.dsp import StftConfig, fractional_delay, istft, spectral_energy, stft, windowed_energy
from arraybench.geometry import Direction, angular_error, tetrahedral_array
from arraybench.metrics import bss_eval_single, si_sdr, snr_bin, stoi
from arraybench.report import report_json
from arraybench.roomsim import (
    CLIP_SECONDS,
    RoomSpec,
    SourcePlacement,
    convolve_source,
    estimate_t60,
    mic_positions_in_room,
    sample_scene,
    simulate_rir,
)
from arraybench.sources import synthetic_speech
from arraybench.spatial import doa_least_squares, estimate_tdoas, gcc_features, tdoa_from_positions

pytestmark = pytest.mark.slow

HARD_N = 200
HARD_SEED = 2024


def _record(acceptance_log, k, ok, detail):
    acceptance_log.append(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def hard_results(tmp_path_factory):
    root = tmp_path_factory.mktemp("hard")
    cfg = corpus.CorpusConfig(n=HARD_N, regime="hard", seed=HARD_SEED)
    corpus.synth_corpus(cfg, root / "corpus")
    methods = ("mixture", "das_oracle", "mvdr_oracle", "irm")
    return corpus.run_benchmark(root / "corpus", methods)


def _si_sdri(result):
    return np.array([it["si_sdri"] for it in result.items if "error" not in it])


def test_c1_hard_regime_beamformers(hard_results, acceptance_log):
    assert all(r.failures == 0 for r in hard_results.values())
    das_m = _si_sdri(hard_results["das_oracle"]).mean()
    mvdr_m = _si_sdri(hard_results["mvdr_oracle"]).mean()
    ok = das_m < 0 and mvdr_m < 0 and mvdr_m <= das_m
    _record(
        acceptance_log,
        1,
        ok,
        f"N={HARD_N} DAS {das_m:+.2f} dB, MVDR {mvdr_m:+.2f} dB (need both < 0, MVDR <= DAS)",
    )


def test_c2_das_positive_control(acceptance_log):
    g = tetrahedral_array()
    rng = np.random.default_rng(0)
    s = synthetic_speech(100, 4.0)
    gains = []
    for az, el in [(0.0, 0.0), (0.5, 0.2), (-0.7, -0.3)]:
        d = Direction(az, el)
        clean = np.array([fractional_delay(s, t) for t in steering_delays(g, d)])
        noise = rng.standard_normal(clean.shape)
        y = das(clean + noise, g, d)
        gains.append(si_sdr(s, y) - si_sdr(clean[0], clean[0] + noise[0]))
    ok = all(abs(v - 10 * math.log10(4)) <= 0.5 for v in gains)
    _record(acceptance_log, 2, ok, "DAS gains " + ", ".join(f"{v:.2f}" for v in gains) + " dB (6.02 +- 0.5)")


def test_c3_oracle_mask_headroom(hard_results, acceptance_log):
    irm = _si_sdri(hard_results["irm"])
    frac = float(np.mean(irm > 0))
    means = {m: _si_sdri(hard_results[m]).mean() for m in ("mixture", "das_oracle", "mvdr_oracle")}
    ok = frac >= 0.95 and all(irm.mean() > v for v in means.values())
    _record(
        acceptance_log,
        3,
        ok,
        f"IRM > 0 on {100 * frac:.1f}% of items, mean {irm.mean():+.2f} dB vs "
        + ", ".join(f"{k} {v:+.2f}" for k, v in means.items()),
    )


def test_c4_geometry_constants(acceptance_log):
    g = tetrahedral_array(0.05, 0.08, 16000, 343.0)
    ok = abs(g.max_distance - 0.0943) <= 1e-4 and abs(g.max_delay_samples - 4.40) <= 0.02
    _record(
        acceptance_log, 4, ok, f"baseline {g.max_distance:.5f} m, delay {g.max_delay_samples:.3f} samples"
    )


def _direct_arrival(h):
    """First local maximum reaching half the global peak, refined parabolically."""
    a = np.abs(h)
    thr = 0.5 * a.max()
    k = int(np.argmax(a >= thr))
    while k + 1 < len(a) and a[k + 1] >= a[k]:
        k += 1
    if 0 < k < len(a) - 1:
        den = a[k - 1] - 2 * a[k] + a[k + 1]
        if den != 0:
            return k + 0.5 * (a[k - 1] - a[k + 1]) / den
    return float(k)


def test_c5_rir_validity(acceptance_log):
    g = tetrahedral_array()
    worst_dp, t60_ratios = 0.0, []
    for seed in range(100):
        room, target, _, center = sample_scene(seed)
        rir = simulate_rir(room, target, g, center)
        mics = mic_positions_in_room(g, center)
        expected = np.linalg.norm(mics - target.position, axis=1) / g.speed_of_sound * g.sample_rate
        for m in range(g.n_mics):
            worst_dp = max(worst_dp, abs(_direct_arrival(rir.taps[m]) - expected[m]))
        if 0.2 <= room.rt60 <= 0.8:
            t60_ratios.append(estimate_t60(rir.taps[0], g.sample_rate) / room.rt60)
    t60_ratios = np.array(t60_ratios)
    ok = worst_dp <= 1.0 and np.all(np.abs(t60_ratios - 1) <= 0.3)
    _record(
        acceptance_log,
        5,
        ok,
        f"direct path worst {worst_dp:.3f} samples; T60 ratio range "
        f"[{t60_ratios.min():.3f}, {t60_ratios.max():.3f}] over {len(t60_ratios)} scenes",
    )


def test_c6_spatial_accuracy(acceptance_log):
    g = tetrahedral_array()
    room = RoomSpec((12.0, 12.0, 6.0), 0.3, max_image_order=0)
    center = np.array([6.0, 6.0, 3.0])
    mics = mic_positions_in_room(g, center)
    rng = np.random.default_rng(6)
    worst_tdoa, worst_doa, fails = 0.0, 0.0, 0
    for i in range(500):
        d = Direction(math.radians(rng.uniform(-45, 45)), math.radians(rng.uniform(-20, 20)))
        pos = center + rng.uniform(1.0, 3.0) * d.unit_vector()
        src = SourcePlacement.at(pos, center, "target")
        rir = simulate_rir(room, src, g, center)
        s = synthetic_speech(5000 + i, CLIP_SECONDS)
        x = convolve_source(s, rir, len(s))
        t = estimate_tdoas(gcc_features(x, g))
        err_t = np.abs(t.delays - tdoa_from_positions(g, mics, pos)).max()
        est = doa_least_squares(t, g)
        err_d = math.inf if est.degenerate else math.degrees(angular_error(est.direction, d))
        worst_tdoa, worst_doa = max(worst_tdoa, err_t), max(worst_doa, err_d)
        fails += err_t > 0.5 or err_d > 5.0
    _record(
        acceptance_log,
        6,
        fails == 0,
        f"500 scenes: worst TDOA {worst_tdoa:.3f} samples, worst DOA {worst_doa:.2f} deg, {fails} failures",
    )


def test_c7_transform_fidelity(acceptance_log):
    cfg = StftConfig()
    x = np.random.default_rng(7).standard_normal((4, 32000))
    S = stft(x, cfg)
    rt = np.linalg.norm(istft(S) - x) / np.linalg.norm(x)
    pars = abs(spectral_energy(S) - windowed_energy(x, cfg)) / windowed_energy(x, cfg)
    g = tetrahedral_array()
    v = steering_vector(g, Direction(0.3, -0.1), cfg.frequencies())
    w = mvdr_weights(estimate_covariance(S), v)
    dist = np.abs(np.einsum("fm,fm->f", w.conj(), v) - 1).max()
    ok = rt < 1e-6 and pars < 1e-6 and dist < 1e-6
    _record(
        acceptance_log, 7, ok, f"round trip {rt:.2e}, Parseval {pars:.2e}, |w^H d - 1| {dist:.2e}"
    )


def test_c8_metric_correctness(acceptance_log):
    rng = np.random.default_rng(8)
    s = synthetic_speech(200, 4.0)
    e = s + 0.5 * rng.standard_normal(len(s))
    scale = max(abs(si_sdr(s, k * e) - si_sdr(s, e)) for k in (1e-3, 0.5, 7.0, 1e3))
    n = rng.standard_normal(len(s))
    n -= s * (n @ s) / (s @ s)
    n *= math.sqrt((s @ s) / (n @ n) * 10 ** (-3.0 / 10))
    closed = abs(si_sdr(s, s + n) - 3.0)
    self_stoi = stoi(s, s)
    sdr, sar = bss_eval_single(s, e)
    bins_ok = (
        snr_bin(-1.0) == "[-1,1)"
        and snr_bin(1.0) == "[1,3)"
        and snr_bin(2.999) == "[1,3)"
        and snr_bin(7.0) == "[7,10]"
        and snr_bin(10.0) == "[7,10]"
    )
    ok = scale < 1e-9 and closed < 1e-9 and abs(self_stoi - 1) <= 1e-3 and sdr == sar and bins_ok
    _record(
        acceptance_log,
        8,
        ok,
        f"scale drift {scale:.1e} dB, closed form {closed:.1e} dB, STOI(s,s) {self_stoi:.6f}, "
        f"SDR==SAR {sdr == sar}, bins {bins_ok}",
    )


def test_c9_determinism(tmp_path, acceptance_log):
    texts = []
    for workers in (1, 2):
        root = tmp_path / f"w{workers}"
        cfg = corpus.CorpusConfig(n=6, regime="hard", seed=99)
        corpus.synth_corpus(cfg, root / "corpus", workers=workers)
        res = corpus.run_benchmark(root / "corpus", corpus.METHODS, workers=workers)
        texts.append(corpus.dumps(report_json(res)))
        manifest = (root / "corpus" / "manifest.json").read_bytes()
        texts.append(manifest.decode())
    ok = texts[0] == texts[2] and texts[1] == texts[3]
    _record(acceptance_log, 9, ok, "report and manifest JSON byte-identical for 1 vs 2 workers")
