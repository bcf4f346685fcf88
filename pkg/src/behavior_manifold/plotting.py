"""Figure rendering for trajectories, similarity matrices and loss curves.

Figures go straight to files through the Agg backend. Metadata that would
vary between runs (creation date, random SVG ids) is pinned so re-running a
stage rewrites identical bytes.
"""

from __future__ import annotations

import io
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .atomic import atomic_write_bytes  # noqa: E402

plt.rcParams["svg.hashsalt"] = "behavior-manifold"


def _save(fig, path) -> None:
    fmt = os.path.splitext(os.fspath(path))[1].lstrip(".").lower() or "png"
    metadata = {"Date": None} if fmt in ("svg", "pdf") else {}
    if fmt == "png":
        metadata = {"Software": None}
    buf = io.BytesIO()
    fig.savefig(buf, format=fmt, metadata=metadata, bbox_inches="tight")
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_trajectory(t_start_s, series: dict[str, np.ndarray], path, title: str = "",
                    n_neighbors: int | None = None) -> None:
    """One line per behavior code, score in [0, 1] against session time."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    minutes = np.asarray(t_start_s) / 60.0
    for code, values in series.items():
        ax.plot(minutes, values, label=code, linewidth=1.2)
    ax.set_xlabel("time (min)")
    label = "positive fraction" if n_neighbors is None else f"positive fraction of top {n_neighbors}"
    ax.set_ylabel(label)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(loc="upper right", fontsize="small", ncol=min(len(series), 5))
    _save(fig, path)


def plot_confusion(matrix, ids, path, title: str = "") -> None:
    matrix = np.asarray(matrix)
    size = max(4.0, 0.45 * len(ids) + 2)
    fig, ax = plt.subplots(figsize=(size, size))
    im = ax.imshow(matrix, cmap="Blues", vmin=0.0, vmax=max(float(matrix.max()), 1e-12))
    ax.set_xticks(range(len(ids)), ids, rotation=90)
    ax.set_yticks(range(len(ids)), ids)
    ax.set_xlabel("nearest-neighbor file")
    ax.set_ylabel("query file")
    if len(ids) <= 16:
        for i in range(len(ids)):
            for j in range(len(ids)):
                ax.text(j, i, f"{100 * matrix[i, j]:.0f}", ha="center", va="center", fontsize=7,
                        color="white" if matrix[i, j] > 0.5 * matrix.max() else "black")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_loss_history(val_history, train_history, path, best_epoch: int | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(range(len(val_history)), val_history, marker="o", label="validation")
    if train_history:
        ax.plot(range(1, len(train_history) + 1), train_history, marker=".", label="train")
    if best_epoch is not None:
        ax.axvline(best_epoch, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss per tuple")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_accuracy_bars(summary: dict[str, float], path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = list(summary)
    ax.bar(names, [100 * summary[n] for n in names], color="tab:blue")
    ax.axhline(50, color="grey", linestyle="--", linewidth=1)
    ax.set_ylabel("session accuracy (%)")
    ax.set_ylim(0, 100)
    if title:
        ax.set_title(title)
    _save(fig, path)
