"""Command line entry point: ``arraybench <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import beamform, corpus, mask, metrics, roomsim, spatial
from .dsp import StftConfig, save_tensor, stft
from .geometry import tetrahedral_array
from .sources import write_wav

log = logging.getLogger("arraybench")


def _load_config(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _scene_dirs(paths):
    """Expand corpus roots (with manifest.json) into their item directories."""
    out = []
    for p in map(Path, paths):
        if (p / "manifest.json").exists():
            m = corpus.load_manifest(p)
            out += [(p / it["scene"]).parent for it in m["items"]]
        else:
            out.append(p)
    return out


def cmd_synth(args):
    conf = _load_config(args.config)
    for key in ("n", "regime", "seed", "sources"):
        val = getattr(args, key)
        if val is not None:
            conf[key] = val
    cfg = corpus.CorpusConfig(**conf)
    manifest = corpus.synth_corpus(cfg, args.out, args.workers)
    print(f"wrote {manifest['n_items']} scenes ({cfg.regime}, seed {cfg.seed}) to {args.out}")
    return 0


def cmd_rir(args):
    g = tetrahedral_array()
    room, target, interferer, center = roomsim.sample_scene(args.seed)
    if args.order is not None:
        room = roomsim.RoomSpec(room.dimensions, room.rt60, args.order, room.sample_rate)
    src = target if args.source == "target" else interferer
    rir = roomsim.simulate_rir(room, src, g, center)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / f"rir_{args.source}.wav", rir.taps, room.sample_rate)
    info = {
        "seed": args.seed,
        "room": room.to_dict(),
        "source": src.to_dict(),
        "direct_path_sample": rir.direct_path_sample.tolist(),
        "peak_sample": np.argmax(np.abs(rir.taps), axis=1).tolist(),
    }
    if room.max_image_order != 0:
        info["t60_schroeder"] = roomsim.estimate_t60(rir.taps[0], room.sample_rate)
    (out / "rir.json").write_text(corpus.dumps(info))
    from .plotting import plot_rir

    edc = roomsim.schroeder_decay(rir.taps[0]) if room.max_image_order != 0 else None
    plot_rir(rir.taps, room.sample_rate, out / f"rir_{args.source}.png", edc)
    print(json.dumps(info, indent=2))
    return 0


def cmd_spatial(args):
    for d in _scene_dirs(args.scenes):
        mix, ref, scene, fs = corpus.load_item(d)
        g = corpus.geometry_from_scene(scene)
        feats = spatial.gcc_features(mix, g, bins=args.bins, framed=args.framed)
        tdoas = spatial.estimate_tdoas(feats)
        doa = spatial.doa_least_squares(tdoas, g)
        print(f"{d}:")
        for (i, j), t, c in zip(tdoas.pairs, tdoas.delays, tdoas.confidence):
            print(f"  pair {i}-{j}: tdoa {t:+7.3f} samples  confidence {c:.3f}")
        truth = scene["target_doa_deg"]
        if doa.degenerate:
            print("  doa: degenerate (zero direction vector)")
        else:
            az, el = doa.direction.degrees()
            print(
                f"  doa: az {az:+7.2f} el {el:+7.2f} deg  residual {doa.residual:.3f}"
                f"  (truth az {truth['azimuth']:+7.2f} el {truth['elevation']:+7.2f})"
            )
        if args.json:
            (d / "gcc_features.json").write_text(feats.to_json())
        if args.plot:
            from .plotting import plot_gcc

            plot_gcc(feats, d / "gcc_features.png")
    return 0


def _write_estimate(d: Path, name: str, est, ref, mix, scene, fs):
    out = d / name
    out.mkdir(exist_ok=True)
    write_wav(out / "est.wav", est, fs)
    rep = metrics.evaluate(ref, est, mix[corpus.REF_MIC], scene["snr_db"], fs)
    (out / "metrics.json").write_text(corpus.dumps(rep.to_dict()))
    return rep


def cmd_beamform(args):
    failures = 0
    for d in _scene_dirs(args.scenes):
        try:
            mix, ref, scene, fs = corpus.load_item(d)
            g = corpus.geometry_from_scene(scene)
            if args.steer == "oracle":
                direction = corpus.oracle_direction(scene)
            else:
                direction, _ = corpus.estimate_direction(mix, g)
            if args.method == "das":
                est = beamform.das(mix, g, direction, reference=corpus.REF_MIC)
            else:
                noise = None
                if args.covariance == "noise":
                    noise = _noise_component(scene, args.sources)
                est = beamform.mvdr_beamform(
                    mix, g, direction, loading=args.loading, reference=corpus.REF_MIC, noise=noise
                )
            name = f"{args.method}_{args.steer}" + ("_noisecov" if args.covariance == "noise" else "")
            rep = _write_estimate(d, name, est, ref, mix, scene, fs)
            print(f"{d}: SI-SDR {rep.si_sdr:.2f} dB  SI-SDRi {rep.si_sdri:+.2f} dB")
        except Exception as exc:
            failures += 1
            print(f"{d}: FAILED {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def _noise_component(scene: dict, sources):
    """Re-render an item from its stored seed to recover interferer plus sensor noise."""
    cfg = corpus.CorpusConfig(
        n=1,
        regime=scene["regime"],
        sources=sources,
        clip_seconds=scene["clip_seconds"],
        noise_floor_db=scene["noise_floor_db"],
    )
    registry = corpus.SourceRegistry.scan(sources, cfg.clip_seconds) if sources else None
    rec, _ = corpus.render_scene(cfg, scene["index"], registry, seed=scene["seed"])
    return rec.interferer + rec.noise


def cmd_extract(args):
    cfg = StftConfig()
    for d in _scene_dirs(args.scenes):
        mix, ref, scene, fs = corpus.load_item(d)
        X = stft(mix[corpus.REF_MIC], cfg)
        S = stft(ref, cfg)
        if args.mask == "irm":
            m = mask.ideal_ratio_mask(S, X, exponent=args.exponent)
        else:
            m = mask.ideal_binary_mask(S, X, args.threshold)
        est = mask.apply_mask(m, X)
        rep = _write_estimate(d, args.mask, est, ref, mix, scene, fs)
        if args.dump_mask:
            save_tensor(d / args.mask / "mask.abt", m.values)
        print(f"{d}: SI-SDR {rep.si_sdr:.2f} dB  SI-SDRi {rep.si_sdri:+.2f} dB")
    return 0


def cmd_eval(args):
    from .report import report_text, write_report

    methods = args.methods.split(",") if args.methods else corpus.METHODS
    results = corpus.run_benchmark(args.corpus, methods, args.workers)
    corpus.save_results(results, args.out)
    write_report(results, args.out, figures=not args.no_figures)
    print(report_text(results), end="")
    return 1 if any(r.failures for r in results.values()) else 0


def cmd_report(args):
    from .report import report_text, write_report

    results = corpus.load_results(args.results)
    if not results:
        print(f"no items_*.json in {args.results}", file=sys.stderr)
        return 1
    write_report(results, args.out or args.results, figures=not args.no_figures)
    print(report_text(results), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arraybench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="simulate a corpus of scenes")
    s.add_argument("--n", type=int)
    s.add_argument("--regime", choices=sorted(corpus.REGIMES))
    s.add_argument("--seed", type=int)
    s.add_argument("--sources", help="directory of mono WAVs (default: synthetic speech)")
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="JSON file with corpus settings")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("rir", help="simulate and plot the RIRs of one sampled scene")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--source", choices=("target", "interferer"), default="target")
    s.add_argument("--order", type=int, help="maximum image order (default: cover RT60)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rir)

    s = sub.add_parser("spatial", help="GCC-PHAT TDOAs and least-squares DOA")
    s.add_argument("scenes", nargs="+")
    s.add_argument("--bins", type=int, default=64)
    s.add_argument("--framed", action="store_true", help="average per-frame GCC-PHAT")
    s.add_argument("--json", action="store_true", help="dump gcc_features.json per scene")
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_spatial)

    s = sub.add_parser("beamform", help="DAS or MVDR toward the target")
    s.add_argument("scenes", nargs="+")
    s.add_argument("--method", choices=("das", "mvdr"), default="das")
    s.add_argument("--steer", choices=("oracle", "estimated"), default="oracle")
    s.add_argument(
        "--covariance",
        choices=("mixture", "noise"),
        default="mixture",
        help="MVDR covariance source; 'noise' re-renders the item (diagnostic only)",
    )
    s.add_argument("--loading", type=float, default=beamform.DEFAULT_LOADING)
    s.add_argument("--sources", help="source directory used when the corpus was synthesized")
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser("extract", help="oracle mask extraction with reference phase")
    s.add_argument("scenes", nargs="+")
    s.add_argument("--mask", choices=("irm", "ibm"), default="irm")
    s.add_argument("--exponent", type=int, choices=(1, 2), default=1)
    s.add_argument("--threshold", type=float, default=0.0, help="IBM threshold in dB")
    s.add_argument("--dump-mask", action="store_true")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("eval", help="benchmark methods over a corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--methods", help=f"comma separated subset of {','.join(corpus.METHODS)}")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="rebuild tables and figures from stored results")
    s.add_argument("--results", required=True)
    s.add_argument("--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
