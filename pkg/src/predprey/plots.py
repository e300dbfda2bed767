"""Figure rendering for the harness outputs.

Strictly a consumer of the emitted CSV data: each function takes the rows
or matrices the harness already wrote and renders a PNG next to them.
Headless backend; nothing here touches the simulation.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import OUTPUTS, read_series_csv  # noqa: E402


def plot_series(source: str | Path | np.ndarray, out: str | Path, title: str | None = None) -> Path:
    """Population and energy dynamics of one run.

    ``source`` is a series CSV path or its (m+1, 6) matrix. Cell-bound food
    count and mean countdown are scaled (noted in the legend) so the curves
    share an axis.
    """
    matrix = read_series_csv(source) if isinstance(source, (str, Path)) else np.asarray(source)
    it = np.arange(matrix.shape[0])
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
    top.plot(it, matrix[:, 0], label="prey", color="tab:green", lw=0.9)
    top.plot(it, matrix[:, 1], label="predators", color="tab:red", lw=0.9)
    top.plot(it, matrix[:, 2] / 4.0, label="food cells / 4", color="tab:gray", lw=0.9)
    top.set_ylabel("count")
    top.legend(loc="upper right", fontsize=8)
    if title:
        top.set_title(title)
    bottom.plot(it, matrix[:, 3], label="mean prey energy", color="tab:green", lw=0.9)
    bottom.plot(it, matrix[:, 4], label="mean predator energy", color="tab:red", lw=0.9)
    bottom.plot(it, 4.0 * matrix[:, 5], label="mean countdown x 4", color="tab:gray", lw=0.9)
    bottom.set_xlabel("iteration")
    bottom.set_ylabel("energy / countdown")
    bottom.legend(loc="upper right", fontsize=8)
    out = Path(out)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_matrix_summary(summary_rows: list[tuple], out: str | Path) -> Path:
    """Mean wall time per matrix cell, bars annotated with spread."""
    cells = [r for r in summary_rows if r[6] != ""]
    labels = [f"{r[0]} s{r[1]} p{r[2]} n{r[3]}" + (f" b{r[4]}" if r[0] == "od" else "") for r in cells]
    means = [float(r[6]) for r in cells]
    rsds = [float(r[7]) if r[7] else 0.0 for r in cells]
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(cells) + 2), 4.5))
    x = np.arange(len(cells))
    ax.bar(x, means, yerr=[m * r / 100.0 for m, r in zip(means, rsds)], capsize=3, color="tab:blue")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean wall time (s)")
    out = Path(out)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_comparison(rows: list[tuple], out: str | Path) -> Path:
    """P-values of the cross-variant rank tests with the 0.05/0.01 lines."""
    p = np.array([float(r[2]) for r in rows])
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(10, 4.5))
    colors = ["tab:red" if v < 0.01 else "tab:orange" if v < 0.05 else "tab:blue" for v in p]
    ax.scatter(x, p, c=colors, s=18)
    ax.axhline(0.05, color="tab:orange", lw=0.8, ls="--", label="0.05")
    ax.axhline(0.01, color="tab:red", lw=0.8, ls="--", label="0.01")
    ax.set_ylim(-0.02, 1.05)
    ax.set_ylabel("p-value")
    # one tick per observable block of six statistics
    block = len(rows) // len(OUTPUTS) if rows else 1
    ax.set_xticks(x[::block] if block else x)
    ax.set_xticklabels([rows[i][0] for i in range(0, len(rows), block)] if block else [],
                       rotation=20, ha="right", fontsize=8)
    ax.legend(loc="upper right", fontsize=8)
    out = Path(out)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
