"""Pixel confusion accumulation, IoU, mIoU, and relative improvement."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

from .errors import ShapeMismatchError
from .tensor import IGNORE_LABEL, DenseMask


class ConfusionCounts:
    """Per-class TP/FP/FN pixel counts; merging partitions is associative.

    True negatives are never tracked: IoU does not consume them.
    """

    def __init__(self):
        self._tp: dict[int, int] = {}
        self._fp: dict[int, int] = {}
        self._fn: dict[int, int] = {}

    def classes(self) -> tuple[int, ...]:
        seen = set(self._tp) | set(self._fp) | set(self._fn)
        return tuple(sorted(seen))

    def counts(self, class_id: int) -> tuple[int, int, int]:
        return (
            self._tp.get(class_id, 0),
            self._fp.get(class_id, 0),
            self._fn.get(class_id, 0),
        )

    def add(self, pred: DenseMask, gt: DenseMask, class_set: Sequence[int]) -> "ConfusionCounts":
        """Accumulate one prediction; pixels where gt is ignore contribute nothing."""
        if (pred.height, pred.width) != (gt.height, gt.width):
            raise ShapeMismatchError(
                f"prediction is {pred.height}x{pred.width}, ground truth is {gt.height}x{gt.width}")
        valid = gt.labels != IGNORE_LABEL
        for c in class_set:
            p = (pred.labels == c) & valid
            g = (gt.labels == c) & valid
            self._tp[c] = self._tp.get(c, 0) + int(np.count_nonzero(p & g))
            self._fp[c] = self._fp.get(c, 0) + int(np.count_nonzero(p & ~g))
            self._fn[c] = self._fn.get(c, 0) + int(np.count_nonzero(~p & g))
        return self

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        for c in other.classes():
            tp, fp, fn = other.counts(c)
            self._tp[c] = self._tp.get(c, 0) + tp
            self._fp[c] = self._fp.get(c, 0) + fp
            self._fn[c] = self._fn.get(c, 0) + fn
        return self

    def iou(self, class_id: int) -> float:
        tp, fp, fn = self.counts(class_id)
        denom = tp + fp + fn
        return tp / denom if denom else 0.0


def accumulate(counts: ConfusionCounts, pred: DenseMask, gt: DenseMask,
               class_set: Sequence[int]) -> ConfusionCounts:
    """Update counts with one prediction/ground-truth pair.

    Background (0) participates only when listed in class_set; by default it
    is predicted but excluded from IoU reporting.
    """
    return counts.add(pred, gt, class_set)


def iou(counts: ConfusionCounts, class_id: int) -> float:
    """TP / (TP + FP + FN); 0 when the class never occurs nor is predicted."""
    return counts.iou(class_id)


def miou(per_class_iou) -> float:
    """Arithmetic mean of per-class IoU values (also the cross-fold mean)."""
    if isinstance(per_class_iou, Mapping):
        values = [float(v) for _, v in sorted(per_class_iou.items())]
    else:
        values = [float(v) for v in per_class_iou]
    if not values:
        raise ValueError("miou of an empty class list")
    return float(np.mean(np.asarray(values, dtype=np.float64)))


def relative_improvement(candidate: float, baseline: float) -> float:
    """Percent change of candidate over baseline, half-up to two decimals."""
    if baseline <= 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    pct = 100.0 * (candidate - baseline) / baseline
    return float(Decimal(repr(pct)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_improvement(pct: float) -> str:
    return f"{pct:+.2f}%"


@dataclass(frozen=True)
class FoldReport:
    """Evaluation summary for one fold under one seeded configuration."""

    fold_index: int
    per_class_iou: dict[int, float]
    miou: float
    episodes: int
    seed: int
    config: dict

    def as_dict(self) -> dict:
        return {
            "fold": self.fold_index,
            "episodes": self.episodes,
            "seed": self.seed,
            "per_class_iou": {str(c): self.per_class_iou[c] for c in sorted(self.per_class_iou)},
            "miou": self.miou,
            "config": self.config,
        }
