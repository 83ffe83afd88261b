"""
Figures for bench and sweep reports. Rendered off-screen to files.
"""
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def pretty_plot(width=8, height=None, nrows=1, ncols=1):
    """
    Figure with the font sizes used throughout the reports.

    Args:
        width: Width in inches.
        height: Height in inches. Defaults to width * golden ratio.
    """
    golden_ratio = (math.sqrt(5) - 1.0) / 2.0
    if not height:
        height = width * golden_ratio
    fig, axes = plt.subplots(nrows, ncols, figsize=(width, height), facecolor="w")
    for ax in fig.axes:
        ax.tick_params(labelsize=width * 1.4)
    return fig, axes


def plot_sweep(rows, path, title=None):
    """BE and MBSU against draft vocabulary size K (the sweet-spot curve)."""
    rows = sorted(rows, key=lambda r: r.K)
    ks = [r.K for r in rows]
    fig, (ax_be, ax_mbsu) = pretty_plot(10, 4, ncols=2)
    ax_be.plot(ks, [r.block_efficiency for r in rows], "o-", color="tab:blue")
    ax_mbsu.plot(ks, [r.mbsu for r in rows], "s-", color="tab:red")
    best = max(rows, key=lambda r: r.mbsu)
    ax_mbsu.axvline(best.K, ls="--", color="grey", lw=1)
    for ax, label in ((ax_be, "block efficiency"), (ax_mbsu, "MBSU")):
        ax.set_xscale("log")
        ax.set_xlabel("draft vocabulary size K", fontsize=12)
        ax.set_ylabel(label, fontsize=12)
        ax.grid(alpha=0.3)
    if title:
        fig.suptitle(title, fontsize=13)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bench(report, path):
    rows = report.rows
    labels = [f"{r.calibration_source}\nK={r.K}" for r in rows]
    x = range(len(rows))
    fig, (ax_be, ax_mbsu) = pretty_plot(10, 4, ncols=2)
    ax_be.bar(x, [r.block_efficiency for r in rows], color="tab:blue")
    ax_mbsu.bar(x, [r.mbsu for r in rows], color="tab:red")
    for ax, label in ((ax_be, "block efficiency"), (ax_mbsu, "MBSU")):
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels, fontsize=9)
        ax.set_ylabel(label, fontsize=12)
    fig.suptitle(rows[0].task if rows else "", fontsize=13)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
