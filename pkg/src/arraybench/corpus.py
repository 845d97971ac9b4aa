"""Corpus synthesis, benchmark execution and result tables.

Every item is rendered from a seed derived from ``(master_seed, index)`` so
a corpus, and every number computed on it, is reproducible regardless of
how many worker processes are used.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import beamform, mask, metrics, roomsim, spatial
from .dsp import StftConfig, stft
from .errors import CorpusError
from .geometry import ArrayGeometry, Direction, tetrahedral_array
from .sources import list_sources, load_mono, read_wav, synthetic_speech, write_wav

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FS = 16000
REGIMES = {
    "base": (5.0, 20.0),
    "cl1": (1.0, 10.0),
    "cl2": (-1.0, 10.0),
    "hard": (-1.0, 10.0),
}
METHODS = ("mixture", "das_oracle", "mvdr_oracle", "das_estimated", "irm", "ibm")
WORKERS_ENV = "ARRAYBENCH_WORKERS"
REF_MIC = 0


def dumps(obj) -> str:
    """JSON text with stable formatting for byte-identical reruns."""
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def worker_count(requested: int | None = None) -> int:
    if requested:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


def item_seed(master_seed: int, index: int) -> int:
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass
class CorpusConfig:
    n: int = 200
    regime: str = "hard"
    seed: int = 0
    sources: str | None = None
    clip_seconds: float = roomsim.CLIP_SECONDS
    noise_floor_db: float = roomsim.NOISE_FLOOR_DB

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise CorpusError(f"unknown regime {self.regime!r}; choose from {sorted(REGIMES)}")
        if self.n < 1:
            raise CorpusError("corpus needs at least one item")

    @property
    def snr_range(self) -> tuple[float, float]:
        return REGIMES[self.regime]

    @classmethod
    def from_json(cls, path) -> "CorpusConfig":
        data = json.loads(Path(path).read_text())
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


@dataclass
class SourceRegistry:
    paths: list = field(default_factory=list)
    durations: list = field(default_factory=list)

    @classmethod
    def scan(cls, directory, clip_seconds: float) -> "SourceRegistry":
        reg = cls()
        for p in list_sources(directory):
            x, fs = read_wav(p)
            dur = x.shape[-1] / fs
            if dur >= clip_seconds:
                reg.paths.append(str(p))
                reg.durations.append(dur)
        if len(reg.paths) < 2:
            raise CorpusError(
                f"need at least 2 source WAVs of >= {clip_seconds} s in {directory}, "
                f"found {len(reg.paths)}"
            )
        return reg

    def to_list(self) -> list:
        return [{"path": p, "duration": d} for p, d in zip(self.paths, self.durations)]


def _pick_source(rng, registry: SourceRegistry | None, n: int, exclude: int | None, synth_seed: int):
    if registry is None:
        return synthetic_speech(synth_seed, n / FS, FS), None
    choices = [i for i in range(len(registry.paths)) if i != exclude]
    k = int(rng.choice(choices))
    x = load_mono(registry.paths[k], FS)
    if len(x) < n:
        raise CorpusError(f"{registry.paths[k]} is shorter than the clip")
    start = int(rng.integers(0, len(x) - n + 1))
    return x[start : start + n], k


def render_scene(
    cfg: CorpusConfig,
    index: int,
    registry: SourceRegistry | None = None,
    g=None,
    seed: int | None = None,
):
    """Simulate one item. Returns (SceneRecording, scene metadata dict).

    ``seed`` overrides the seed derived from ``(cfg.seed, index)``, which lets
    an item be re-rendered from the seed stored in its scene.json.
    """
    g = g or tetrahedral_array()
    seed = item_seed(cfg.seed, index) if seed is None else int(seed)
    room, target, interferer, center = roomsim.sample_scene(seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n = int(round(cfg.clip_seconds * FS))
    snr = float(rng.uniform(*cfg.snr_range))
    synth_seeds = rng.integers(0, 2**63, size=2)
    s_target, k_t = _pick_source(rng, registry, n, None, int(synth_seeds[0]))
    s_interf, k_i = _pick_source(rng, registry, n, k_t, int(synth_seeds[1]))
    rir_t = roomsim.simulate_rir(room, target, g, center)
    rir_i = roomsim.simulate_rir(room, interferer, g, center)
    rec = roomsim.mix_at_snr(
        roomsim.convolve_source(s_target, rir_t, n),
        roomsim.convolve_source(s_interf, rir_i, n),
        snr,
        cfg.noise_floor_db,
        rng,
        REF_MIC,
    )
    az, el = target.direction_from_array.degrees()
    scene = {
        "index": index,
        "seed": seed,
        "regime": cfg.regime,
        "snr_db": snr,
        "clip_seconds": cfg.clip_seconds,
        "noise_floor_db": cfg.noise_floor_db,
        "interferer_gain": rec.interferer_gain,
        "room": room.to_dict(),
        "array": {
            "center": [float(v) for v in center],
            "mics": roomsim.mic_positions_in_room(g, center).tolist(),
            "geometry": json.loads(g.to_json()),
        },
        "target": target.to_dict(),
        "interferer": interferer.to_dict(),
        "target_doa_deg": {"azimuth": az, "elevation": el},
        "sources": {
            "target": None if k_t is None else registry.paths[k_t],
            "interferer": None if k_i is None else registry.paths[k_i],
        },
    }
    rec.metadata = scene
    return rec, scene


def item_dir_name(index: int) -> str:
    return f"item_{index:05d}"


def _synth_one(args):
    cfg, index, registry, out = args
    rec, scene = render_scene(cfg, index, registry)
    d = Path(out) / item_dir_name(index)
    d.mkdir(parents=True, exist_ok=True)
    write_wav(d / "mix.wav", rec.mixture, FS)
    write_wav(d / "target_ref.wav", rec.clean_reference, FS)
    (d / "scene.json").write_text(dumps(scene))
    return index


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def synth_corpus(cfg: CorpusConfig, out_dir, workers: int | None = None) -> dict:
    """Render ``cfg.n`` scenes into ``out_dir`` and write ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    registry = SourceRegistry.scan(cfg.sources, cfg.clip_seconds) if cfg.sources else None
    jobs = [(cfg, i, registry, str(out)) for i in range(cfg.n)]
    _map(_synth_one, jobs, worker_count(workers))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "master_seed": cfg.seed,
        "n_items": cfg.n,
        "regime": {"name": cfg.regime, "snr_range": list(cfg.snr_range)},
        "clip_seconds": cfg.clip_seconds,
        "noise_floor_db": cfg.noise_floor_db,
        "items": [
            {
                "index": i,
                "seed": item_seed(cfg.seed, i),
                "scene": f"{item_dir_name(i)}/scene.json",
            }
            for i in range(cfg.n)
        ],
        "sources": registry.to_list() if registry else [],
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return manifest


def load_manifest(corpus_dir) -> dict:
    path = Path(corpus_dir) / "manifest.json"
    if not path.exists():
        raise CorpusError(f"{path} not found")
    manifest = json.loads(path.read_text())
    if len(manifest["items"]) != manifest["n_items"]:
        raise CorpusError("manifest item count mismatch")
    return manifest


def validate_corpus(corpus_dir) -> list[str]:
    """Problems found in the corpus; empty when every listed file exists and parses."""
    root = Path(corpus_dir)
    manifest = load_manifest(root)
    problems = []
    for item in manifest["items"]:
        scene_path = root / item["scene"]
        d = scene_path.parent
        for name in ("mix.wav", "target_ref.wav", "scene.json"):
            if not (d / name).exists():
                problems.append(f"{d / name} missing")
        if scene_path.exists():
            try:
                scene = json.loads(scene_path.read_text())
                if scene["seed"] != item_seed(manifest["master_seed"], item["index"]):
                    problems.append(f"{scene_path}: seed does not match manifest")
            except (json.JSONDecodeError, KeyError) as exc:
                problems.append(f"{scene_path}: {exc}")
    return problems


def load_item(item_dir):
    d = Path(item_dir)
    mix, fs = read_wav(d / "mix.wav")
    ref, _ = read_wav(d / "target_ref.wav")
    scene = json.loads((d / "scene.json").read_text())
    return mix, ref, scene, fs


def geometry_from_scene(scene: dict) -> ArrayGeometry:
    geo = scene["array"]["geometry"]
    return ArrayGeometry(np.array(geo["mics"]), geo["fs"], geo["c"])


def oracle_direction(scene: dict) -> Direction:
    doa = scene["target_doa_deg"]
    return Direction(np.deg2rad(doa["azimuth"]), np.deg2rad(doa["elevation"]))


def estimate_direction(mix, g: ArrayGeometry) -> tuple[Direction, bool]:
    """DOA from GCC-PHAT TDOAs; falls back to broadside (0, 0) when degenerate."""
    tdoas = spatial.estimate_tdoas(spatial.gcc_features(mix, g))
    est = spatial.doa_least_squares(tdoas, g)
    if est.degenerate:
        return Direction(0.0, 0.0), False
    return est.direction, True


def run_method(method: str, mix, ref, scene: dict, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Mono estimate of the target at the reference mic."""
    g = geometry_from_scene(scene)
    if method == "mixture":
        return mix[REF_MIC].copy()
    if method == "das_oracle":
        return beamform.das(mix, g, oracle_direction(scene), reference=REF_MIC)
    if method == "das_estimated":
        d, _ = estimate_direction(mix, g)
        return beamform.das(mix, g, d, reference=REF_MIC)
    if method == "mvdr_oracle":
        return beamform.mvdr_beamform(mix, g, oracle_direction(scene), cfg, reference=REF_MIC)
    if method in ("irm", "ibm"):
        X = stft(mix[REF_MIC], cfg)
        S = stft(ref, cfg)
        if method == "irm":
            m = mask.ideal_ratio_mask(S, X)
        else:
            m = mask.ideal_binary_mask(S, X, 0.0)
        return mask.apply_mask(m, X)
    raise ValueError(f"unknown method {method!r}")


def _eval_item(args):
    item_dir, methods = args
    rows = {}
    try:
        mix, ref, scene, fs = load_item(item_dir)
    except Exception as exc:  # unreadable item: flag and move on
        return {m: {"error": f"{type(exc).__name__}: {exc}"} for m in methods}, None
    for m in methods:
        try:
            est = run_method(m, mix, ref, scene)
            rep = metrics.evaluate(ref, est, mix[REF_MIC], scene["snr_db"], fs)
            rows[m] = rep.to_dict()
        except Exception as exc:
            rows[m] = {"error": f"{type(exc).__name__}: {exc}"}
    return rows, scene["index"]


@dataclass
class BenchmarkResult:
    method: str
    items: list
    summary: dict
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(1 for it in self.items if "error" in it)

    def reports(self) -> list:
        return [
            metrics.MetricsReport(**{k: it[k] for k in metrics.MetricsReport.__dataclass_fields__})
            for it in self.items
            if "error" not in it
        ]


def summarize(items: list, snr_range) -> dict:
    reports = [
        metrics.MetricsReport(**{k: it[k] for k in metrics.MetricsReport.__dataclass_fields__})
        for it in items
        if "error" not in it
    ]
    lo, hi = snr_range
    binned = lo >= metrics.SNR_BINS[0][0] and hi <= metrics.SNR_BINS[-1][1]
    if binned:
        return metrics.stratify(reports)
    overall = {"count": len(reports)}
    for name in metrics.METRIC_NAMES:
        if reports:
            a = np.array([getattr(r, name) for r in reports])
            overall[name] = {"mean": float(a.mean()), "std": float(a.std())}
    return {"overall": overall, "bins": {}}


def run_benchmark(corpus_dir, methods=METHODS, workers: int | None = None) -> dict:
    """Evaluate every method on every item; returns {method: BenchmarkResult}."""
    root = Path(corpus_dir)
    manifest = load_manifest(root)
    problems = validate_corpus(root)
    if problems:
        log.warning("corpus validation: %d problem(s), first: %s", len(problems), problems[0])
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    jobs = [(str((root / it["scene"]).parent), methods) for it in manifest["items"]]
    start = time.perf_counter()
    outputs = _map(_eval_item, jobs, worker_count(workers))
    elapsed = time.perf_counter() - start
    snr_range = tuple(manifest["regime"]["snr_range"])
    results = {}
    for m in methods:
        items = []
        for it, (rows, _) in zip(manifest["items"], outputs):
            row = {"index": it["index"]}
            row.update(rows[m])
            items.append(row)
        results[m] = BenchmarkResult(
            method=m,
            items=items,
            summary=summarize(items, snr_range),
            wall_clock=elapsed,
            config={
                "corpus": manifest["regime"],
                "master_seed": manifest["master_seed"],
                "n_items": manifest["n_items"],
            },
        )
    return results


def save_results(results: dict, out_dir) -> None:
    """Per-item rows per method plus a run log; timings never enter the report files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m, res in results.items():
        payload = {
            "schema_version": SCHEMA_VERSION,
            "method": m,
            "config": res.config,
            "items": res.items,
        }
        (out / f"items_{m}.json").write_text(dumps(payload))
    runlog = {m: {"wall_clock_s": r.wall_clock, "failures": r.failures} for m, r in results.items()}
    (out / "runlog.json").write_text(dumps(runlog))


def load_results(results_dir) -> dict:
    out = {}
    for p in sorted(Path(results_dir).glob("items_*.json")):
        payload = json.loads(p.read_text())
        snr_range = tuple(payload["config"]["corpus"]["snr_range"])
        out[payload["method"]] = BenchmarkResult(
            method=payload["method"],
            items=payload["items"],
            summary=summarize(payload["items"], snr_range),
            config=payload["config"],
        )
    ordered = {m: out[m] for m in METHODS if m in out}
    ordered.update({m: r for m, r in out.items() if m not in ordered})
    return ordered
