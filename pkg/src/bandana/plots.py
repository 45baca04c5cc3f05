"""Matplotlib figure rendering for report outputs.

Every report-producing CLI command writes its figures next to the
delimited output files.  All figures use the Agg backend so runs work
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_FIG_DPI = 150


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_FIG_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_history(losses, val_metrics, path) -> Path:
    fig, ax1 = plt.subplots(figsize=(6, 3.5))
    epochs = np.arange(len(losses))
    ax1.plot(epochs, losses, color="tab:blue", lw=1.2, label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, val_metrics, color="tab:red", lw=1.2, label="val AUC")
    ax2.set_ylabel("validation AUC", color="tab:red")
    fig.tight_layout()
    return _save(fig, path)


def plot_entropy_histograms(histograms: dict, path) -> Path:
    """histograms: name -> EntropyHistogram, drawn side by side with medians."""
    n = len(histograms)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 3), squeeze=False)
    for ax, (name, h) in zip(axes[0], histograms.items()):
        widths = np.diff(h.bin_edges)
        ax.bar(h.bin_edges[:-1], h.counts, width=widths, align="edge",
               color="steelblue", alpha=0.8)
        ax.axvline(h.median, color="red", ls="--", lw=1.2,
                   label=f"median {h.median:.3f}")
        ax.set_title(name)
        ax.set_xlabel("ego entropy (nats)")
        ax.legend(fontsize=8)
    axes[0][0].set_ylabel("nodes")
    fig.tight_layout()
    return _save(fig, path)


def plot_mask_ratios(rows: list[dict], path) -> Path:
    """rows: [{dataset, calculated, measured}, ...] grouped bar chart."""
    fig, ax = plt.subplots(figsize=(1.6 * max(len(rows), 2) + 1.5, 3.2))
    x = np.arange(len(rows))
    ax.bar(x - 0.18, [r["calculated"] for r in rows], width=0.36, label="calculated")
    ax.bar(x + 0.18, [r["measured"] for r in rows], width=0.36, label="measured")
    ax.set_xticks(x, [r["dataset"] for r in rows])
    ax.set_ylabel("mask ratio")
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_ablation(rows: list[dict], metric: str, path) -> Path:
    """rows: [{strategy, mean, std}, ...] horizontal bars with error whiskers."""
    fig, ax = plt.subplots(figsize=(6, 0.5 * len(rows) + 1.5))
    y = np.arange(len(rows))
    means = [r["mean"] for r in rows]
    stds = [r["std"] for r in rows]
    ax.barh(y, means, xerr=stds, color="steelblue", alpha=0.85, capsize=3)
    ax.set_yticks(y, [r["strategy"] for r in rows])
    ax.invert_yaxis()
    ax.set_xlabel(metric)
    lo = max(0.0, min(means) - 3 * (max(stds) + 1e-3))
    ax.set_xlim(lo, min(1.0, max(means) + 3 * (max(stds) + 1e-3)))
    fig.tight_layout()
    return _save(fig, path)


def plot_depth_sweep(depths, series: dict, path, ylabel: str = "probe accuracy") -> Path:
    """series: label -> (means, stds) per depth."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, (means, stds) in series.items():
        means = np.asarray(means)
        stds = np.asarray(stds)
        ax.plot(depths, means, marker="o", label=label)
        ax.fill_between(depths, means - stds, means + stds, alpha=0.2)
    ax.set_xlabel("encoder depth K")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_components(rows: list[dict], path) -> Path:
    """rows: [{label, components}, ...] bar chart of component counts."""
    fig, ax = plt.subplots(figsize=(1.4 * max(len(rows), 2) + 1.5, 3.2))
    x = np.arange(len(rows))
    ax.bar(x, [r["components"] for r in rows], color="indianred", alpha=0.85)
    ax.set_xticks(x, [r["label"] for r in rows], rotation=20, ha="right")
    ax.set_ylabel("connected components")
    fig.tight_layout()
    return _save(fig, path)


def plot_embedding(coords: np.ndarray, labels, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    if labels is None:
        ax.scatter(coords[:, 0], coords[:, 1], s=8, alpha=0.7)
    else:
        labels = np.asarray(labels)
        for c in np.unique(labels):
            pts = coords[labels == c]
            ax.scatter(pts[:, 0], pts[:, 1], s=8, alpha=0.7, label=str(c))
        ax.legend(fontsize=7, markerscale=1.5)
    if title:
        ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    return _save(fig, path)
