"""Matplotlib figures written next to the text/JSON reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "svg.hashsalt": "arraybench",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_method_summary(results: dict, path, metric: str = "si_sdri"):
    """Bar chart of mean +- std of one metric per method."""
    names, means, stds = [], [], []
    for name, res in results.items():
        stat = res.summary.get("overall", {}).get(metric)
        if stat:
            names.append(name)
            means.append(stat["mean"])
            stds.append(stat["std"])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        x = np.arange(len(names))
        colors = ["tab:red" if m < 0 else "tab:blue" for m in means]
        ax.bar(x, means, yerr=stds, color=colors, capsize=3)
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylabel(f"{metric.upper().replace('SI_SDRI', 'SI-SDRi')} (dB)")
        _save(fig, path)


def plot_snr_bins(results: dict, path, metric: str = "si_sdri"):
    """Mean metric per SNR bin, one line per method."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        labels = None
        for name, res in results.items():
            bins = res.summary.get("bins", {})
            if not bins:
                continue
            labels = list(bins)
            y = [bins[b][metric]["mean"] if metric in bins[b] else np.nan for b in labels]
            ax.plot(range(len(labels)), y, marker="o", label=name)
        if labels:
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels)
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xlabel("Input SNR (dB)")
        ax.set_ylabel("SI-SDRi (dB)")
        ax.legend(frameon=False, ncol=2)
        _save(fig, path)


def plot_rir(taps, fs: int, path, edc_db=None):
    """Impulse responses (one per mic) with an optional energy decay curve."""
    taps = np.atleast_2d(taps)
    t = np.arange(taps.shape[1]) / fs
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2 if edc_db is not None else 1, 1, figsize=(5.0, 4.0), squeeze=False)
        for m, h in enumerate(taps):
            axes[0, 0].plot(t * 1e3, h, lw=0.6, label=f"mic {m}")
        axes[0, 0].set_xlabel("Time (ms)")
        axes[0, 0].legend(frameon=False, ncol=4)
        if edc_db is not None:
            axes[1, 0].plot(t * 1e3, edc_db, lw=0.8)
            axes[1, 0].set_ylim(-70, 2)
            axes[1, 0].set_xlabel("Time (ms)")
            axes[1, 0].set_ylabel("EDC (dB)")
        _save(fig, path)


def plot_gcc(features, path):
    """Heat map of the pair x lag GCC-PHAT tensor."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 2.4))
        lags = features.lags
        im = ax.imshow(
            features.values,
            aspect="auto",
            origin="lower",
            extent=(lags[0] - 0.5, lags[-1] + 0.5, -0.5, len(features.pairs) - 0.5),
            cmap="viridis",
        )
        ax.set_yticks(range(len(features.pairs)))
        ax.set_yticklabels([f"{i}-{j}" for i, j in features.pairs])
        ax.set_xlabel("Lag (samples)")
        ax.set_ylabel("Pair")
        fig.colorbar(im, ax=ax)
        _save(fig, path)
