"""Point-based scoring of detection flags against ground truth.

Truth arrives either as individual anomalous timestamps or as inclusive
[start, end] anomaly windows; both expand to one boolean per series point.
Metrics are plain point-based precision, recall, and F-measure with the
convention that an undefined ratio (zero denominator) scores 0.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ConfusionCounts",
    "LabelSet",
    "MetricsReport",
    "expand_labels",
    "score",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f_measure: float
    counts: ConfusionCounts


class LabelSet:
    """Ground-truth anomaly labels for one series.

    kind is "points" (a set of anomalous timestamps) or "windows" (inclusive
    [start, end] spans). Windows are normalized on construction: sorted by
    start and merged wherever they overlap. Timestamps only need a total
    order; integers, floats, datetimes, and uniform strings all work.
    """

    __slots__ = ("kind", "points", "windows")

    def __init__(self, kind: str, points=None, windows=None):
        if kind not in ("points", "windows"):
            raise ValueError('label kind must be "points" or "windows"')
        self.kind = kind
        self.points = frozenset(points) if points is not None else frozenset()
        self.windows = tuple(windows) if windows is not None else ()

    @classmethod
    def from_points(cls, timestamps) -> "LabelSet":
        return cls("points", points=timestamps)

    @classmethod
    def from_windows(cls, pairs) -> "LabelSet":
        spans = []
        for pair in pairs:
            start, end = pair
            if end < start:
                raise ValueError(f"window end {end!r} precedes start {start!r}")
            spans.append((start, end))
        spans.sort()
        merged: list[tuple] = []
        for start, end in spans:
            if merged and start <= merged[-1][1]:
                if end > merged[-1][1]:
                    merged[-1] = (merged[-1][0], end)
            else:
                merged.append((start, end))
        return cls("windows", windows=merged)

    @classmethod
    def empty(cls) -> "LabelSet":
        return cls("points")

    def is_empty(self) -> bool:
        return not self.points and not self.windows


def expand_labels(labels: LabelSet, timestamps: Sequence) -> np.ndarray:
    """One boolean per timestamp: True where the label set marks an anomaly.

    Timestamps must be strictly increasing. Window membership is inclusive
    on both ends.
    """
    ts = list(timestamps)
    for i in range(len(ts) - 1):
        if not ts[i] < ts[i + 1]:
            raise ValueError(f"timestamps not strictly increasing at position {i + 1}")
    truth = np.zeros(len(ts), dtype=bool)
    if labels.kind == "points":
        for i, t in enumerate(ts):
            if t in labels.points:
                truth[i] = True
    else:
        for start, end in labels.windows:
            lo = bisect_left(ts, start)
            hi = bisect_right(ts, end)
            truth[lo:hi] = True
    return truth


def score(flags, truth) -> MetricsReport:
    """Point-based precision, recall, and F-measure of flags against truth."""
    f = np.asarray(flags, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if f.shape != t.shape:
        raise ValueError(f"flags ({f.shape[0]}) and truth ({t.shape[0]}) differ in length")
    tp = int(np.count_nonzero(f & t))
    fp = int(np.count_nonzero(f & ~t))
    fn = int(np.count_nonzero(~f & t))
    tn = int(f.shape[0] - tp - fp - fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f_measure = (
        2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return MetricsReport(precision, recall, f_measure, ConfusionCounts(tp, fp, fn, tn))
