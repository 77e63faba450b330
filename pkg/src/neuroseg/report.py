"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}

SCHEME_COLORS = {
    "proposed": "#1f5fa8",
    "baseline": "#8c8c8c",
    "distance": "#d98c1f",
    "contour-strip": "#4c9a4c",
}


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    # no version string or timestamp in the file, so reruns are byte-identical
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_metrics(rows, path, columns=("F1_det", "Dice", "F1_seg", "AJI")):
    """Per-image scores as dots over a mean bar for each metric."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        x = np.arange(len(columns))
        for k, col in enumerate(columns):
            vals = np.array([r[col] for r in rows], dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size == 0:
                continue
            ax.bar(k, vals.mean(), width=0.6, color="#c9d6e8", edgecolor="#1f5fa8",
                   yerr=vals.std(), capsize=3)
            jitter = np.linspace(-0.18, 0.18, vals.size) if vals.size > 1 else np.zeros(1)
            ax.plot(k + jitter, vals, "o", ms=3, color="#1f5fa8")
        ax.set_xticks(x, columns)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("score")
        ax.set_title(f"Evaluation over {len(rows)} image(s)")
        fig.tight_layout()
        _save(fig, path)


def plot_comparison(summary, path):
    """Grouped mean +- std bars of F1-seg and AJI per post-processing scheme.

    ``summary`` maps scheme -> {"F1_seg": (mean, std), "AJI": (mean, std)}.
    """
    schemes = list(summary)
    metrics = ("F1_seg", "AJI")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        width = 0.8 / max(len(schemes), 1)
        for i, name in enumerate(schemes):
            means = [summary[name][m][0] for m in metrics]
            stds = [summary[name][m][1] for m in metrics]
            pos = np.arange(len(metrics)) - 0.4 + width * (i + 0.5)
            ax.bar(pos, means, width=width, yerr=stds, capsize=2, label=name,
                   color=SCHEME_COLORS.get(name, "#555555"))
        ax.set_xticks(np.arange(len(metrics)), ["F1-seg", "AJI"])
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("mean score")
        ax.legend(loc="lower right", ncol=2)
        fig.tight_layout()
        _save(fig, path)


def plot_overlay(probmap, labels, path):
    """Neuron probability in grey with instance outlines in colour."""
    from scipy import ndimage as ndi

    labels = np.asarray(labels)
    edges = (ndi.maximum_filter(labels, size=3) != ndi.minimum_filter(labels, size=3)) & (labels > 0)
    rng = np.random.default_rng(0)
    palette = rng.uniform(0.2, 1.0, size=(int(labels.max()) + 1, 3))
    rgb = np.repeat(np.asarray(probmap)[..., 2:3], 3, axis=-1).astype(float)
    rgb[edges] = palette[labels[edges]]
    h, w = labels.shape
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(w / 100, h / 100))
        ax = fig.add_axes([0, 0, 1, 1])
        ax.imshow(rgb, interpolation="nearest")
        ax.set_axis_off()
        _save(fig, path)
