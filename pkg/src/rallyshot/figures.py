"""Figure rendering for the report paths.

Every report subcommand writes its delimited output first; these helpers
render the matching matplotlib figure next to it. Rendering is deterministic
for fixed inputs (Agg backend, no timestamps in the image).
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .classifier import SweepRow  # noqa: E402
from .evaluate import GapSummaryRow  # noqa: E402


def render_threshold_curves(rows: Sequence[SweepRow], best: SweepRow, path) -> None:
    """Accuracy / precision / recall / F1 against the decision threshold."""
    thresholds = [r.threshold for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(thresholds, [r.accuracy for r in rows], label="accuracy")
    ax.plot(thresholds, [r.precision for r in rows], label="precision")
    ax.plot(thresholds, [r.recall for r in rows], label="recall")
    ax.plot(thresholds, [r.f1 for r in rows], label="F1")
    ax.axvline(best.threshold, color="gray", linestyle="--", linewidth=1,
               label=f"optimal = {best.threshold:.2f}")
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("metric")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_gap_report(summary: Sequence[GapSummaryRow],
                      hist: Sequence[tuple[float, float, int]], path) -> None:
    """Prediction error against gap length, plus the pooled error histogram."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    gaps = [r.gap for r in summary]
    ax1.plot(gaps, [r.median for r in summary], marker="o", label="median")
    ax1.plot(gaps, [r.p90 for r in summary], marker="s", label="p90")
    ax1.plot(gaps, [r.max for r in summary], marker="^", label="max")
    ax1.axhline(200.0, color="red", linestyle="--", linewidth=1,
                label="reassignment radius")
    ax1.set_xlabel("gap length (frames)")
    ax1.set_ylabel("prediction error (px)")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)

    finite = [(lo, hi, n) for lo, hi, n in hist if hi != float("inf")]
    ax2.bar([lo for lo, _, _ in finite],
            [n for _, _, n in finite],
            width=[hi - lo for lo, hi, _ in finite],
            align="edge", edgecolor="white", linewidth=0.3)
    overflow = sum(n for lo, hi, n in hist if hi == float("inf"))
    title = "error histogram"
    if overflow:
        title += f" ({overflow} beyond 400 px)"
    ax2.set_title(title, fontsize=9)
    ax2.set_xlabel("prediction error (px)")
    ax2.set_ylabel("count")
    ax2.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_training_curves(logs_by_name: dict[str, Sequence], path) -> None:
    """Epoch loss curves for one or more training runs."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, log in logs_by_name.items():
        epochs = [row.epoch for row in log]
        ax.plot(epochs, [row.loss for row in log], label=f"{name} loss")
        ax.plot(epochs, [row.best_loss for row in log], linestyle="--",
                linewidth=1, label=f"{name} best")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
