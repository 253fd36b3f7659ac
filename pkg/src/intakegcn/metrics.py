"""Segment-wise gesture scoring.

Frame-label timelines are first collapsed into maximal same-class runs
(background never forms a segment). Predicted segments are then matched to
ground truth greedily in temporal order: every prediction claims the
still-unmatched ground-truth segment of highest temporal IoU and counts as
a true positive when that IoU reaches the threshold k, else as a false
positive; leftover ground truth counts as false negatives. One prediction
can claim at most one ground truth and vice versa, so both oversegmented
and merged predictions are penalized. Precision / recall / F1 follow from
the counts per class and threshold.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_THRESHOLDS = (0.1, 0.25, 0.5)
SCORED_CLASSES = {1: "eating", 2: "drinking"}


@dataclass(frozen=True)
class GestureSegment:
    class_id: int  # 1 = eat, 2 = drink
    start: int  # inclusive frame
    end: int  # exclusive frame

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"empty segment [{self.start}, {self.end})")
        if self.class_id == 0:
            raise ValueError("background cannot form a segment")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "EvalCounts") -> "EvalCounts":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self


@dataclass
class EvalReport:
    """Per (class, threshold) counts and metrics, plus a micro-averaged
    'overall' entry with counts pooled over the scored classes."""

    per_class: dict[str, dict[float, dict]] = field(default_factory=dict)

    def f1(self, class_name: str, k: float) -> float:
        return self.per_class[class_name][k]["f1"]

    def to_dict(self) -> dict:
        return {
            cls: {str(k): dict(entry) for k, entry in by_k.items()}
            for cls, by_k in self.per_class.items()
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def to_text(self) -> str:
        """Aligned table: class, k, TP/FP/FN counts and the metrics."""
        header = (
            f"{'Gesture type':<14}{'k':>6}{'TP(#)':>8}{'FP(#)':>8}{'FN(#)':>8}"
            f"{'Precision(%)':>14}{'Recall(%)':>12}{'F1-score(%)':>13}"
        )
        lines = [header, "-" * len(header)]
        for cls, by_k in self.per_class.items():
            for k, e in by_k.items():
                lines.append(
                    f"{cls:<14}{k:>6.2f}{e['tp']:>8}{e['fp']:>8}{e['fn']:>8}"
                    f"{100 * e['precision']:>14.2f}{100 * e['recall']:>12.2f}"
                    f"{100 * e['f1']:>13.2f}"
                )
        return "\n".join(lines)


def frames_to_segments(labels: np.ndarray) -> list[GestureSegment]:
    """Maximal runs of identical nonzero labels, in temporal order."""
    labels = np.asarray(labels)
    segments: list[GestureSegment] = []
    start = None
    current = 0
    for idx, lab in enumerate(labels):
        lab = int(lab)
        if lab == current:
            continue
        if current != 0:
            segments.append(GestureSegment(current, start, idx))
        start = idx if lab != 0 else None
        current = lab
    if current != 0:
        segments.append(GestureSegment(current, start, len(labels)))
    return segments


def iou(a: GestureSegment, b: GestureSegment) -> float:
    """Temporal intersection over union on frame intervals."""
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union if union > 0 else 0.0


def match_segments(
    gt: list[GestureSegment], pred: list[GestureSegment], k: float
) -> EvalCounts:
    """Greedy one-to-one matching for a single class at threshold k.

    Both lists must be temporally sorted and internally non-overlapping.
    Ties on IoU break toward the earlier ground-truth segment.
    """
    for name, segs in (("gt", gt), ("pred", pred)):
        for prev, cur in zip(segs, segs[1:]):
            if cur.start < prev.end:
                raise ValueError(f"{name} segments overlap: {prev} / {cur}")

    matched = [False] * len(gt)
    counts = EvalCounts()
    for p in pred:
        best_iou, best_idx = 0.0, None
        for idx, g in enumerate(gt):
            if matched[idx]:
                continue
            score = iou(p, g)
            if score > best_iou:
                best_iou, best_idx = score, idx
        if best_idx is not None and best_iou >= k:
            matched[best_idx] = True
            counts.tp += 1
        else:
            counts.fp += 1
    counts.fn = matched.count(False)
    return counts


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1) with zero-guarded divisions."""
    if tp < 0 or fp < 0 or fn < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def counts_to_report(counts: dict[str, dict[float, EvalCounts]]) -> EvalReport:
    report = EvalReport()
    for cls, by_k in counts.items():
        report.per_class[cls] = {}
        for k, c in by_k.items():
            precision, recall, f1 = f1_from_counts(c.tp, c.fp, c.fn)
            report.per_class[cls][k] = {
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn,
                "precision": precision,
                "recall": recall,
                "f1": f1,
            }
    return report


def evaluate_counts(
    gt_frames: np.ndarray,
    pred_frames: np.ndarray,
    ks=DEFAULT_THRESHOLDS,
) -> dict[str, dict[float, EvalCounts]]:
    """Raw per-(class, k) counts for one timeline pair."""
    gt_frames = np.asarray(gt_frames)
    pred_frames = np.asarray(pred_frames)
    if gt_frames.shape != pred_frames.shape:
        raise ValueError(
            f"length mismatch: gt {gt_frames.shape} vs pred {pred_frames.shape}"
        )
    gt_segs = frames_to_segments(gt_frames)
    pred_segs = frames_to_segments(pred_frames)

    counts: dict[str, dict[float, EvalCounts]] = {}
    for class_id, name in SCORED_CLASSES.items():
        gt_c = [s for s in gt_segs if s.class_id == class_id]
        pred_c = [s for s in pred_segs if s.class_id == class_id]
        counts[name] = {k: match_segments(gt_c, pred_c, k) for k in ks}
    counts["overall"] = {
        k: sum_counts([counts[name][k] for name in SCORED_CLASSES.values()])
        for k in ks
    }
    return counts


def evaluate(
    gt_frames: np.ndarray,
    pred_frames: np.ndarray,
    ks=DEFAULT_THRESHOLDS,
) -> EvalReport:
    """Full report for one (ground truth, prediction) timeline pair."""
    return counts_to_report(evaluate_counts(gt_frames, pred_frames, ks))


def sum_counts(items) -> EvalCounts:
    total = EvalCounts()
    for c in items:
        total += c
    return total


def merge_count_tables(tables) -> dict[str, dict[float, EvalCounts]]:
    """Pool raw counts from several sequences (counts add associatively)."""
    merged: dict[str, dict[float, EvalCounts]] = {}
    for table in tables:
        for cls, by_k in table.items():
            dest = merged.setdefault(cls, {})
            for k, c in by_k.items():
                if k not in dest:
                    dest[k] = EvalCounts()
                dest[k] += c
    return merged
