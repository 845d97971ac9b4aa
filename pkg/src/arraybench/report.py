"""Text and JSON result tables.

Both are pure functions of the per-item rows, so a report regenerated from
stored item files is identical to the one written after the run.
"""

from __future__ import annotations

from .corpus import SCHEMA_VERSION, dumps
from .metrics import METRIC_NAMES

_HEADERS = {
    "si_sdr": "SI-SDR (dB)",
    "si_sdri": "SI-SDRi (dB)",
    "sdr": "SDR (dB)",
    "sar": "SAR (dB)",
    "stoi": "STOI",
}
_BIN_METRICS = ("si_sdr", "si_sdri", "stoi")


def _cell(stat: dict | None, digits: int = 2) -> str:
    if not stat:
        return "-"
    return f"{stat['mean']:.{digits}f} ± {stat['std']:.{digits}f}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))  # noqa: E731
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines)


def report_json(results: dict) -> dict:
    methods = []
    for name, res in results.items():
        overall = res.summary.get("overall", {})
        methods.append(
            {
                "method": name,
                "n": len(res.items),
                "failures": res.failures,
                "overall": {k: overall.get(k) for k in METRIC_NAMES},
                "bins": res.summary.get("bins", {}),
            }
        )
    first = next(iter(results.values()), None)
    return {
        "schema_version": SCHEMA_VERSION,
        "corpus": first.config if first else {},
        "methods": methods,
    }


def report_text(results: dict) -> str:
    header = ["Method"] + [_HEADERS[k] for k in METRIC_NAMES] + ["N"]
    rows = []
    for name, res in results.items():
        overall = res.summary.get("overall", {})
        digits = {"stoi": 3}
        rows.append(
            [name]
            + [_cell(overall.get(k), digits.get(k, 2)) for k in METRIC_NAMES]
            + [str(overall.get("count", 0))]
        )
    parts = [_table(header, rows)]
    binned = [(n, r) for n, r in results.items() if r.summary.get("bins")]
    if binned:
        header = ["Method", "SNR Range (dB)", "N"] + [_HEADERS[k] for k in _BIN_METRICS]
        rows = []
        for name, res in binned:
            for label, entry in res.summary["bins"].items():
                rows.append(
                    [name, label, str(entry["count"])]
                    + [
                        _cell(entry.get(k), 3 if k == "stoi" else 2)
                        for k in _BIN_METRICS
                    ]
                )
        parts.append(_table(header, rows))
    failed = {n: r.failures for n, r in results.items() if r.failures}
    if failed:
        parts.append("Failed items: " + ", ".join(f"{n}={c}" for n, c in failed.items()))
    return "\n\n".join(parts) + "\n"


def write_report(results: dict, out_dir, figures: bool = True) -> dict:
    """Write report.txt, report.json and (optionally) PNG figures; returns the JSON dict."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = report_json(results)
    (out / "report.json").write_text(dumps(data))
    (out / "report.txt").write_text(report_text(results))
    if figures:
        from .plotting import plot_method_summary, plot_snr_bins

        plot_method_summary(results, out / "methods_si_sdri.png")
        if any(r.summary.get("bins") for r in results.values()):
            plot_snr_bins(results, out / "snr_bins_si_sdri.png")
    return data
