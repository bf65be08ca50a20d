"""Scoring: confusion metrics, identity-switch counting against ground truth,
and the missing-frame prediction-error report.

Outputs are plain rows ready for CSV; figure rendering lives in figures.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError, ValidationError

DEFAULT_MATCH_RADIUS = 50.0
HIST_BIN_PX = 10.0
HIST_RANGE_PX = 400.0


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def metrics(c: Confusion) -> Metrics:
    """Accuracy, precision, recall, F1; degenerate denominators yield 0."""
    if min(c.tp, c.fp, c.tn, c.fn) < 0:
        raise ValidationError("confusion counts must be non-negative")
    total = c.total
    if total < 1:
        raise DataError("cannot compute metrics over an empty confusion")
    accuracy = (c.tp + c.tn) / total
    precision = c.tp / (c.tp + c.fp) if (c.tp + c.fp) > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


@dataclass
class IdSwitchReport:
    switches: int
    misses: int
    # per true identity: consecutive (predicted id, first frame, last frame) runs
    mapping: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)


def id_switches(
    predicted: Sequence,  # TrackSnapshot-like: .frame, .id, .center, .ghost
    truth: Sequence,      # rows with .frame, .true_id, .center
    match_radius: float = DEFAULT_MATCH_RADIUS,
) -> IdSwitchReport:
    """Count predicted-identity changes per true identity.

    Each truth detection is matched to the nearest non-ghost prediction in the
    same frame within match_radius; unmatched truth detections are misses. A
    switch is a change of matched predicted id between consecutive matched
    appearances of one true identity.
    """
    preds_by_frame: dict[int, list] = {}
    for p in predicted:
        if getattr(p, "ghost", False):
            continue
        preds_by_frame.setdefault(p.frame, []).append(p)

    runs: dict[int, list[tuple[int, int, int]]] = {}
    last_pred: dict[int, int] = {}
    switches = 0
    misses = 0
    for row in sorted(truth, key=lambda r: (r.frame, r.true_id)):
        candidates = preds_by_frame.get(row.frame, [])
        best = None
        for p in candidates:
            d = math.hypot(p.center[0] - row.center[0], p.center[1] - row.center[1])
            if d <= match_radius and (best is None or d < best[0]):
                best = (d, p.id)
        if best is None:
            misses += 1
            continue
        pid = best[1]
        prev = last_pred.get(row.true_id)
        if prev is None or prev != pid:
            if prev is not None:
                switches += 1
            runs.setdefault(row.true_id, []).append((pid, row.frame, row.frame))
        else:
            pid_, first, _ = runs[row.true_id][-1]
            runs[row.true_id][-1] = (pid_, first, row.frame)
        last_pred[row.true_id] = pid
    return IdSwitchReport(switches=switches, misses=misses, mapping=runs)


@dataclass(frozen=True)
class GapSummaryRow:
    gap: int
    count: int
    median: float
    p90: float
    max: float


def gap_report(
    distances_by_gap: Mapping[int, Sequence[float]],
) -> tuple[list[GapSummaryRow], list[tuple[float, float, int]]]:
    """Summarize prediction-error distances per gap length.

    Returns (per-gap summary rows, pooled histogram rows (bin_lo, bin_hi,
    count)). Bins are 10 px wide over [0, 400); an overflow row collects
    anything beyond.
    """
    if not distances_by_gap:
        raise DataError("no gap samples to report")
    summary = []
    pooled: list[float] = []
    for gap in sorted(distances_by_gap):
        values = np.asarray(distances_by_gap[gap], dtype=np.float64)
        if values.size == 0:
            raise DataError(f"gap {gap} has no samples")
        summary.append(GapSummaryRow(
            gap=gap, count=int(values.size),
            median=float(np.median(values)),
            p90=float(np.percentile(values, 90)),
            max=float(values.max())))
        pooled.extend(values.tolist())

    n_bins = int(HIST_RANGE_PX / HIST_BIN_PX)
    counts = [0] * n_bins
    overflow = 0
    for v in pooled:
        if v >= HIST_RANGE_PX:
            overflow += 1
        else:
            counts[int(v // HIST_BIN_PX)] += 1
    hist = [(i * HIST_BIN_PX, (i + 1) * HIST_BIN_PX, counts[i]) for i in range(n_bins)]
    hist.append((HIST_RANGE_PX, math.inf, overflow))
    return summary, hist
