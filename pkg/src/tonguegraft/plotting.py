"""Figure rendering for the report subcommands.

Every function takes a finished report object and writes one PNG.  The Agg
backend is forced so rendering works in headless environments; nothing here
ever opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .diagnostics import BalanceReport, EfficiencyReport, TransitionReport


def plot_efficiency(report: EfficiencyReport, path: str) -> None:
    """Token-count comparison with the efficiency gain in the title."""
    fig, ax = plt.subplots(figsize=(5, 4))
    bars = ax.bar(
        ["base", "expanded"],
        [report.base_tokens, report.expanded_tokens],
        color=["#888888", "#2c7fb8"],
    )
    ax.bar_label(bars, fmt="%d")
    ax.set_ylabel("tokens over corpus")
    ax.set_title(
        f"ratio {report.token_ratio:.3f}, gain {report.efficiency_gain * 100:.1f}%"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_balance(report: BalanceReport, path: str) -> None:
    """Side-by-side class counts for predictions and gold labels."""
    labels = sorted(set(report.pred_counts) | set(report.label_counts))
    pred = [report.pred_counts.get(l, 0) for l in labels]
    gold = [report.label_counts.get(l, 0) for l in labels]
    x = range(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(5, len(labels) * 1.2), 4))
    ax.bar([i - width / 2 for i in x], pred, width, label="predictions", color="#2c7fb8")
    ax.bar([i + width / 2 for i in x], gold, width, label="gold", color="#888888")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("count")
    flag = "unstable" if report.unstable else "stable"
    ax.set_title(
        f"majority {report.majority_pred_fraction:.2f} vs threshold "
        f"{report.threshold:.2f}: {flag}"
    )
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_transition(report: TransitionReport, path: str) -> None:
    """Heatmap of the joint before/after score histogram."""
    fig, ax = plt.subplots(figsize=(5, 4.5))
    # imshow puts row 0 at the top; origin="lower" keeps low scores at the
    # bottom-left so the stable diagonal runs bottom-left to top-right.
    image = ax.imshow(
        [list(row) for row in report.counts],
        origin="lower",
        cmap="viridis",
        extent=(report.lo, report.hi, report.lo, report.hi),
        aspect="auto",
    )
    ax.plot([report.lo, report.hi], [report.lo, report.hi], color="white", lw=0.8, ls="--")
    ax.set_xlabel("after score")
    ax.set_ylabel("before score")
    ax.set_title(f"diagonal fraction {report.diagonal_fraction:.2f} (n={report.n})")
    fig.colorbar(image, ax=ax, label="items")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
