"""Figure rendering for the benchmark harness.

All functions take already-computed result structures and write PNG files;
nothing here feeds back into the numeric outputs, so figures can be disabled
without changing any emitted data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_ring_comparison(distributions: dict, path: str | Path) -> None:
    """Input distribution against each mechanism's output, over ring indices."""
    fig, ax = plt.subplots(figsize=(7, 4))
    mu = np.asarray(distributions["input"])
    idx = np.arange(mu.size)
    ax.bar(idx, mu, width=0.8, alpha=0.3, color="gray", label="input")
    for name, nu in distributions.items():
        if name == "input":
            continue
        ax.plot(idx, np.asarray(nu), marker="o", markersize=3, linewidth=1.2, label=name)
    ax.set_xlabel("ring position")
    ax.set_ylabel("probability")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_convergence(series: dict, path: str | Path) -> None:
    """Hilbert residual and distance-to-input per iteration, one line per lambda."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for label, data in series.items():
        its = data["iteration"]
        axes[0].semilogy(its, np.maximum(data["hilbert_residual"], 1e-300), label=label)
        axes[1].plot(its, data["wasserstein_to_input"], label=label)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("Hilbert step residual")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("distance to input")
    for ax in axes:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_worst_case(rows: list[dict], path: str | Path) -> None:
    """Worst-case utility against the privacy budget, one line per mechanism."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = sorted({r["mechanism"] for r in rows})
    for name in names:
        pts = sorted((r["epsilon"], r["utility"]) for r in rows if r["mechanism"] == name)
        ax.plot([e for e, _ in pts], [u for _, u in pts], marker="o", label=name)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("worst-case distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_grid_heatmaps(
    true_agg: np.ndarray, estimates: dict, rows: int, cols: int, path: str | Path
) -> None:
    """True aggregate next to each mechanism's estimated aggregate."""
    n = 1 + len(estimates)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2))
    axes = np.atleast_1d(axes)
    vmax = max(float(np.max(true_agg)), max((float(np.max(v)) for v in estimates.values()), default=0.0))
    axes[0].imshow(np.asarray(true_agg).reshape(rows, cols), vmin=0, vmax=vmax)
    axes[0].set_title("true")
    for ax, (name, est) in zip(axes[1:], sorted(estimates.items())):
        ax.imshow(np.asarray(est).reshape(rows, cols), vmin=0, vmax=vmax)
        ax.set_title(name)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
