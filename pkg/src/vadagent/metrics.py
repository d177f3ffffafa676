"""Frame-level ROC-AUC and average precision.

Both handle tied scores explicitly, since verdict probabilities take only a
handful of distinct values per video: AUC gives tied positive/negative pairs
half credit, and AP treats every run of equal scores as one threshold step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateLabelsError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledSeries:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.scores) != len(self.labels):
            raise ValueError("scores and labels differ in length")


def _prepare(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def _tie_blocks(s: np.ndarray, y: np.ndarray):
    """Yield (positives, negatives) per group of equal scores, highest score first."""
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    bounds = np.flatnonzero(np.diff(s)) + 1
    for block in np.split(y, bounds):
        pos = int(block.sum())
        yield pos, len(block) - pos


def roc_auc(scores, labels) -> float:
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("degenerate labels")
    # count, for each block, negatives it beats (those below) plus half the tied ones
    wins = 0.0
    neg_above = 0
    for pos, neg in _tie_blocks(s, y):
        wins += pos * (n_neg - neg_above - neg) + 0.5 * pos * neg
        neg_above += neg
    return wins / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    s, y = _prepare(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateLabelsError("degenerate labels")
    ap = 0.0
    tp = fp = 0
    for pos, neg in _tie_blocks(s, y):
        tp += pos
        fp += neg
        if pos:
            ap += (pos / n_pos) * (tp / (tp + fp))
    return ap


def micro_average(per_video: Sequence[LabeledSeries]) -> tuple[float, float]:
    """AUC and AP over all frames of all videos concatenated."""
    scores = np.concatenate([np.asarray(v.scores, dtype=np.float64) for v in per_video])
    labels = np.concatenate([np.asarray(v.labels) for v in per_video])
    return roc_auc(scores, labels), average_precision(scores, labels)


def macro_average(per_video: Sequence[LabeledSeries]) -> dict:
    """Mean of per-video metrics, skipping videos where a metric is undefined."""
    aucs, aps = [], []
    for v in per_video:
        try:
            aucs.append(roc_auc(v.scores, v.labels))
        except DegenerateLabelsError:
            pass
        try:
            aps.append(average_precision(v.scores, v.labels))
        except DegenerateLabelsError:
            pass
    return {
        "auc": float(np.mean(aucs)) if aucs else None,
        "ap": float(np.mean(aps)) if aps else None,
        "videos_auc": len(aucs),
        "videos_ap": len(aps),
    }
