"""Segment extraction and matching under the strict IoU > 0.5 rule.

Segments are matched within per-class pools for known classes and in a single
class-agnostic pool for unknown clusters. Because two segments can only
overlap by more than half mutually exclusively, every segment has at most one
possible partner and greedy matching is already optimal.

Matched-IoU totals are accumulated as exact rationals, which makes merging
accumulators associative and commutative bit-for-bit: any reduction topology
(sequential, tree, worker pools in any order) produces identical metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (
    VOID,
    GossMap,
    ValidationError,
    check_class_count,
    require_same_n,
    require_same_shape,
    validate_pair_consistency,
)

KNOWN = "known"
UNKNOWN = "unknown"


@dataclass(frozen=True, eq=False)
class Segment:
    """One matched unit: a known class's full extent, or one unknown cluster."""

    kind: str  # KNOWN or UNKNOWN
    ident: int  # class id for KNOWN, cluster id for UNKNOWN
    indices: np.ndarray  # flat pixel indices, sorted ascending
    grid_size: int  # pixel count of the map the indices refer to

    @property
    def key(self):
        return (self.kind, self.ident)

    @property
    def pixel_count(self) -> int:
        return int(self.indices.size)


def extract_segments(m: GossMap) -> list:
    """All segments of a consistent map: one per known class present, one per
    distinct unknown cluster id. Void pixels belong to no segment."""
    if not validate_pair_consistency(m):
        raise ValidationError("map has inconsistent (class, cluster) pairs")
    cls = m.class_map.ravel()
    clu = m.cluster_map.ravel()
    size = cls.size
    segments = []
    for k in np.unique(cls[cls < m.n_classes]):
        segments.append(Segment(KNOWN, int(k), np.flatnonzero(cls == k), size))
    unknown = cls == m.n_classes
    for c in np.unique(clu[unknown]):
        segments.append(Segment(UNKNOWN, int(c), np.flatnonzero(unknown & (clu == c)), size))
    return segments


def iou(u: Segment, u_hat: Segment, void_mask: np.ndarray | None = None) -> float:
    """Intersection over union with void pixels excluded from both sides."""
    if u.grid_size != u_hat.grid_size:
        raise ValidationError("segments come from maps of different sizes")
    if void_mask is None:
        keep_u = u.indices
        keep_hat = u_hat.indices
    else:
        void_flat = np.asarray(void_mask, dtype=bool).ravel()
        if void_flat.size != u.grid_size:
            raise ValidationError("void mask size does not match the segments' map")
        keep_u = u.indices[~void_flat[u.indices]]
        keep_hat = u_hat.indices[~void_flat[u_hat.indices]]
    inter = np.intersect1d(keep_u, keep_hat, assume_unique=True).size
    union = keep_u.size + keep_hat.size - inter
    if union == 0:
        return 0.0
    return inter / union


@dataclass
class MatchAccumulator:
    """Per-class and unknown-pool tallies of tp/fp/fn and summed matched IoU."""

    n_classes: int
    tp: list = field(default_factory=list)
    fp: list = field(default_factory=list)
    fn: list = field(default_factory=list)
    iou_sum: list = field(default_factory=list)
    tp_uk: int = 0
    fp_uk: int = 0
    fn_uk: int = 0
    iou_sum_uk: Fraction = Fraction(0)

    def __post_init__(self):
        check_class_count(self.n_classes)
        n = self.n_classes
        if not self.tp:
            self.tp = [0] * n
        if not self.fp:
            self.fp = [0] * n
        if not self.fn:
            self.fn = [0] * n
        if not self.iou_sum:
            self.iou_sum = [Fraction(0)] * n
        for name in ("tp", "fp", "fn", "iou_sum"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} must have one entry per known class")

    @classmethod
    def empty(cls, n_classes: int) -> "MatchAccumulator":
        return cls(n_classes=n_classes)

    def merge(self, other: "MatchAccumulator") -> "MatchAccumulator":
        """Field-wise sum; exact, so reduction order never matters."""
        if self.n_classes != other.n_classes:
            raise ValidationError(
                f"cannot merge accumulators for {self.n_classes} vs {other.n_classes} classes"
            )
        return MatchAccumulator(
            n_classes=self.n_classes,
            tp=[a + b for a, b in zip(self.tp, other.tp)],
            fp=[a + b for a, b in zip(self.fp, other.fp)],
            fn=[a + b for a, b in zip(self.fn, other.fn)],
            iou_sum=[a + b for a, b in zip(self.iou_sum, other.iou_sum)],
            tp_uk=self.tp_uk + other.tp_uk,
            fp_uk=self.fp_uk + other.fp_uk,
            fn_uk=self.fn_uk + other.fn_uk,
            iou_sum_uk=self.iou_sum_uk + other.iou_sum_uk,
        )

    def __add__(self, other):
        return self.merge(other)


def match_segments(pred: list, gt: list, void_mask: np.ndarray | None,
                   n_classes: int) -> MatchAccumulator:
    """Match predicted segments to ground-truth segments.

    Pairs exceeding IoU 0.5 (void pixels excluded) become true positives;
    leftover predictions count as false positives unless more than half of
    their pixels lie on ground-truth void; leftover ground truth counts as
    false negatives.
    """
    acc = MatchAccumulator.empty(n_classes)
    for seg in list(pred) + list(gt):
        if seg.kind == KNOWN and not 0 <= seg.ident < n_classes:
            raise ValidationError(f"known segment has class id {seg.ident} outside 0..{n_classes - 1}")
    if not pred and not gt:
        return acc
    sizes = {s.grid_size for s in pred} | {s.grid_size for s in gt}
    if len(sizes) != 1:
        raise ValidationError("all segments must come from maps of one size")
    size = sizes.pop()

    if void_mask is None:
        nonvoid = np.ones(size, dtype=bool)
    else:
        nonvoid = ~np.asarray(void_mask, dtype=bool).ravel()
        if nonvoid.size != size:
            raise ValidationError("void mask size does not match the segments' map")

    pred_idx = np.zeros(size, dtype=np.int64)
    for i, seg in enumerate(pred):
        pred_idx[seg.indices] = i + 1
    gt_idx = np.zeros(size, dtype=np.int64)
    for j, seg in enumerate(gt):
        gt_idx[seg.indices] = j + 1

    n_p, n_g = len(pred), len(gt)
    pred_nv = np.bincount(pred_idx[nonvoid], minlength=n_p + 1)
    gt_nv = np.bincount(gt_idx[nonvoid], minlength=n_g + 1)
    joint = np.bincount(
        pred_idx[nonvoid] * (n_g + 1) + gt_idx[nonvoid],
        minlength=(n_p + 1) * (n_g + 1),
    ).reshape(n_p + 1, n_g + 1)

    pred_matched = [False] * n_p
    gt_matched = [False] * n_g
    for i, u in enumerate(pred):
        for j, u_hat in enumerate(gt):
            if u.kind != u_hat.kind:
                continue
            if u.kind == KNOWN and u.ident != u_hat.ident:
                continue
            inter = int(joint[i + 1, j + 1])
            if inter == 0:
                continue
            union = int(pred_nv[i + 1]) + int(gt_nv[j + 1]) - inter
            if 2 * inter <= union:  # exact test for IoU > 0.5
                continue
            if pred_matched[i] or gt_matched[j]:
                continue
            pred_matched[i] = True
            gt_matched[j] = True
            value = Fraction(inter, union)
            if u.kind == KNOWN:
                acc.tp[u.ident] += 1
                acc.iou_sum[u.ident] += value
            else:
                acc.tp_uk += 1
                acc.iou_sum_uk += value

    for i, u in enumerate(pred):
        if pred_matched[i]:
            continue
        void_overlap = u.pixel_count - int(pred_nv[i + 1])
        if 2 * void_overlap > u.pixel_count:
            continue  # mostly-void predictions are neither right nor wrong
        if u.kind == KNOWN:
            acc.fp[u.ident] += 1
        else:
            acc.fp_uk += 1

    for j, u_hat in enumerate(gt):
        if gt_matched[j]:
            continue
        if u_hat.kind == KNOWN:
            acc.fn[u_hat.ident] += 1
        else:
            acc.fn_uk += 1

    return acc


def match_goss(pred: GossMap, gt: GossMap) -> MatchAccumulator:
    """Extract and match two maps of one image; void comes from the ground truth."""
    require_same_shape(pred.class_map, gt.class_map)
    require_same_n(pred, gt)
    void_mask = gt.class_map == VOID
    return match_segments(
        extract_segments(pred), extract_segments(gt), void_mask, gt.n_classes
    )
