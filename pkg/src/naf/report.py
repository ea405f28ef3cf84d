"""Figures (PNG) and the CSV tables behind them."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .cp_delta import Divergence, combine_next  # noqa: E402
from .dist import Categorical, align_many  # noqa: E402


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def log_ratio_histogram(ratios: np.ndarray, k: float | None, path, marks: dict | None = None) -> Path:
    """Histogram of ``max_q log2 p(y)/q(y)`` over draws from the base model."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    finite = ratios[np.isfinite(ratios)]
    ax.hist(finite, bins=40, color="#4c72b0", alpha=0.85)
    if k is not None:
        ax.axvline(k, color="#c44e52", linestyle="--", label=f"k = {k:.2f} bits")
    for name, value in (marks or {}).items():
        ax.axvline(value, color="#55a868", linestyle=":", label=name)
    ax.set_xlabel("max log-ratio against the cover (bits)")
    ax.set_ylabel("samples")
    if k is not None or marks:
        ax.legend(fontsize=8)
    return _save(fig, path)


def z_histogram(zs: np.ndarray, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.hist(zs, bins=20, range=(0.0, 1.0), color="#8172b2")
    ax.set_xlabel("partition value Z at a visited context")
    ax.set_ylabel("contexts")
    return _save(fig, path)


def spiked_table(q1: Categorical, q2: Categorical) -> tuple[tuple, np.ndarray]:
    """Rows: q1, q2, min-combined, geometric-mean-combined on the union alphabet."""
    mx = combine_next([q1, q2], Divergence.MAX).dist
    gm = combine_next([q1, q2], Divergence.KL).dist
    return align_many([q1, q2, mx, gm])


def spiked_figure(q1: Categorical, q2: Categorical, path) -> Path:
    """Both combiners remove each shard's private spike and keep the shared body."""
    labels, rows = spiked_table(q1, q2)
    names = ["q1", "q2", "combined (max)", "combined (kl)"]
    fig, axes = plt.subplots(len(names), 1, figsize=(7, 6), sharex=True)
    x = np.arange(len(labels))
    for ax, name, row in zip(axes, names, rows):
        ax.bar(x, row, color="#4c72b0")
        ax.set_ylabel(name, fontsize=8)
        ax.set_ylim(0, max(0.6, float(rows.max()) * 1.05))
    axes[-1].set_xticks(x)
    axes[-1].set_xticklabels([str(lab) for lab in labels], rotation=90, fontsize=7)
    return _save(fig, path)
