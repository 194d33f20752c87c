"""Accuracy, ROC curves, and trapezoidal AUC."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import LABEL_PD
from .errors import Empty, LengthMismatch, SingleClass


def accuracy(predicted, actual) -> float:
    """Fraction of positions where the two label vectors agree."""
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape:
        raise LengthMismatch(p.size, a.size)
    if p.size == 0:
        raise Empty("need at least one label")
    return float(np.count_nonzero(p == a)) / p.size


@dataclass(frozen=True)
class RocCurve:
    """(fpr, tpr) points with their thresholds, from (0,0) to (1,1).

    points[k] is the operating point of "predict PD iff score >= thresholds[k]";
    the leading sentinel threshold of +inf yields (0, 0). Tied scores collapse
    to a single point, which makes the trapezoid area equal the pairwise
    ranking statistic with half credit for ties.
    """

    points: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if len(self.points) != len(self.thresholds):
            raise ValueError("points and thresholds must align")
        if self.points[0] != (0.0, 0.0) or self.points[-1] != (1.0, 1.0):
            raise ValueError("curve must run from (0,0) to (1,1)")
        fprs = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        if any(b < a for a, b in zip(fprs, fprs[1:])) or any(
            b < a for a, b in zip(tprs, tprs[1:])
        ):
            raise ValueError("fpr and tpr must be non-decreasing")


def roc_curve(scores, actual) -> RocCurve:
    """ROC points over thresholds at the distinct score values, descending."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(actual)
    if s.shape != y.shape:
        raise LengthMismatch(s.size, y.size)
    pos = y == LABEL_PD
    n_pos = int(np.count_nonzero(pos))
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = pos[order]
    # Last index of each run of equal scores = one operating point per
    # distinct threshold.
    boundary = np.flatnonzero(
        np.concatenate([s_sorted[1:] != s_sorted[:-1], [True]])
    )
    tp = np.cumsum(pos_sorted)[boundary]
    fp = (boundary + 1) - tp

    points = [(0.0, 0.0)]
    thresholds = [float("inf")]
    for k, b in enumerate(boundary):
        points.append((float(fp[k]) / n_neg, float(tp[k]) / n_pos))
        thresholds.append(float(s_sorted[b]))
    return RocCurve(points=tuple(points), thresholds=tuple(thresholds))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    total = 0.0
    for (x0, y0), (x1, y1) in zip(curve.points, curve.points[1:]):
        total += (x1 - x0) * (y0 + y1) / 2.0
    return total


def auc_score(scores, actual) -> float:
    return auc(roc_curve(scores, actual))


def write_roc_csv(curve: RocCurve, path) -> None:
    """ROC export: one (threshold, fpr, tpr) row per operating point."""
    lines = ["threshold,fpr,tpr"]
    for thr, (fpr, tpr) in zip(curve.thresholds, curve.points):
        lines.append(f"{format(thr, '.17g')},{format(fpr, '.17g')},{format(tpr, '.17g')}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_roc_csv(path) -> RocCurve:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "threshold,fpr,tpr":
        raise ValueError(f"{path}: not a ROC CSV")
    thresholds = []
    points = []
    for line in lines[1:]:
        if not line.strip():
            continue
        thr, fpr, tpr = line.split(",")
        thresholds.append(float(thr))
        points.append((float(fpr), float(tpr)))
    return RocCurve(points=tuple(points), thresholds=tuple(thresholds))
