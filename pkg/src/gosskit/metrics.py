"""Quality metrics: the GQ family over matched segments, clustering-only
quality, and threshold-free ranking metrics over anomaly scores.

Metrics that have no data to speak about (no unknown segments anywhere, a
single-class score sample) return None rather than a made-up number.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction

import numpy as np

from .benchgen import class_agnostic_label
from .core import (
    VOID,
    ClusterMap,
    GossMap,
    ValidationError,
    require_same_n,
    require_same_shape,
)
from .matching import UNKNOWN, MatchAccumulator, Segment, match_segments
from .tensorio import MetricReport, PerClassRow

log = logging.getLogger(__name__)


def _pool_quality(iou_sum: Fraction, tp: int, fp: int, fn: int):
    # quality = iou_sum / (tp + fp/2 + fn/2), computed exactly
    denominator = Fraction(2 * tp + fp + fn, 2)
    if denominator == 0:
        return None
    return iou_sum / denominator


def gq_known(acc: MatchAccumulator, strict_n: bool = False) -> float | None:
    """Average per-class quality over the known classes.

    By default classes that never occur (tp+fp+fn == 0) are left out of the
    average; ``strict_n`` divides by all N classes, counting them as 0.
    """
    per_class = [
        _pool_quality(acc.iou_sum[k], acc.tp[k], acc.fp[k], acc.fn[k])
        for k in range(acc.n_classes)
    ]
    if strict_n:
        total = sum((q for q in per_class if q is not None), Fraction(0))
        return float(total / acc.n_classes)
    defined = [q for q in per_class if q is not None]
    if not defined:
        return None
    return float(sum(defined, Fraction(0)) / len(defined))


def gq_unknown(acc: MatchAccumulator) -> float | None:
    """Quality of the single unknown pool."""
    q = _pool_quality(acc.iou_sum_uk, acc.tp_uk, acc.fp_uk, acc.fn_uk)
    return None if q is None else float(q)


def gq(gq_kn: float | None, gq_uk: float | None, lambda_: float,
       fallback: bool = False) -> float | None:
    """Combine known and unknown quality: lambda * known + (1 - lambda) * unknown.

    An undefined unknown term makes the result undefined unless ``fallback``
    returns the known term alone (with a warning); an undefined known term is
    mirrored the same way so the combined score stays defined whenever the
    unknown term is.
    """
    if not 0.0 <= lambda_ <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lambda_}")
    if gq_uk is None:
        if fallback and gq_kn is not None:
            log.warning("no unknown segments anywhere; falling back to the known-class score")
            return gq_kn
        return None
    if gq_kn is None:
        log.warning("no known segments anywhere; reporting the unknown score alone")
        return gq_uk
    return lambda_ * gq_kn + (1.0 - lambda_) * gq_uk


def per_class_rows(acc: MatchAccumulator) -> tuple:
    """Report rows: one per known class plus the unknown pool."""
    rows = [
        PerClassRow(k, float(acc.iou_sum[k]), acc.tp[k], acc.fp[k], acc.fn[k])
        for k in range(acc.n_classes)
    ]
    rows.append(PerClassRow("unknown", float(acc.iou_sum_uk), acc.tp_uk, acc.fp_uk, acc.fn_uk))
    return tuple(rows)


def match_class_agnostic(pred_clusters: ClusterMap, gt: GossMap,
                         connectivity: int = 4) -> MatchAccumulator:
    """Match predicted clusters against the class-agnostic ground truth.

    Ground-truth segments are the connected components of the full ground
    truth with semantics ignored; predictions are the clusters as given.
    The resulting accumulator uses only the unknown pool.
    """
    require_same_shape(pred_clusters.data, gt.class_map)
    require_same_n(pred_clusters, gt)
    gt_nonvoid = gt.class_map != VOID
    if bool((gt_nonvoid & (pred_clusters.data == VOID)).any()):
        raise ValidationError("predicted clusters must cover every non-void pixel")
    reference = class_agnostic_label(gt, connectivity)

    size = gt.class_map.size
    pred_flat = pred_clusters.data.ravel()
    pred_segments = [
        Segment(UNKNOWN, int(c), np.flatnonzero(pred_flat == c), size)
        for c in np.unique(pred_flat[pred_flat != VOID])
    ]
    ref_flat = reference.data.ravel()
    gt_segments = [
        Segment(UNKNOWN, int(c), np.flatnonzero(ref_flat == c), size)
        for c in np.unique(ref_flat[ref_flat != VOID])
    ]
    return match_segments(pred_segments, gt_segments, ~gt_nonvoid, gt.n_classes)


def gq_clu(pred_clusters: ClusterMap, gt: GossMap, connectivity: int = 4) -> float | None:
    """Clustering-only quality, before any fusion with pixel classification."""
    return gq_unknown(match_class_agnostic(pred_clusters, gt, connectivity))


def miou_clusters(pred_clusters: ClusterMap, gt: GossMap, connectivity: int = 4) -> float | None:
    """Mean best IoU over class-agnostic ground-truth segments.

    Each ground-truth segment contributes its matched cluster's IoU, or 0 when
    nothing matched it; the mean runs over all ground-truth segments.
    """
    return miou_from_accumulator(match_class_agnostic(pred_clusters, gt, connectivity))


def miou_from_accumulator(acc: MatchAccumulator) -> float | None:
    total_gt = acc.tp_uk + acc.fn_uk
    if total_gt == 0:
        return None
    return float(acc.iou_sum_uk / total_gt)


def build_report(acc: MatchAccumulator, lambda_: float = 0.5, strict_n: bool = False,
                 fallback: bool = False, gs_acc: MatchAccumulator | None = None,
                 ranking: tuple | None = None) -> MetricReport:
    """Assemble the full report from matched accumulators.

    ``gs_acc`` is the class-agnostic matching accumulator (clustering-only
    metrics); ``ranking`` is an optional (auroc, aupr, fpr_at_95_tpr) triple.
    """
    kn = gq_known(acc, strict_n=strict_n)
    uk = gq_unknown(acc)
    auroc_v, aupr_v, fpr_v = ranking if ranking is not None else (None, None, None)
    return MetricReport(
        gq_known=kn,
        gq_unknown=uk,
        gq=gq(kn, uk, lambda_, fallback=fallback),
        gq_clu=gq_unknown(gs_acc) if gs_acc is not None else None,
        miou_clusters=miou_from_accumulator(gs_acc) if gs_acc is not None else None,
        auroc=auroc_v,
        aupr=aupr_v,
        fpr_at_95_tpr=fpr_v,
        per_class=per_class_rows(acc),
    )


def _check_samples(scores, is_unknown):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(is_unknown, dtype=bool).ravel()
    if scores.size != labels.size:
        raise ValidationError("scores and labels must have equal length")
    if scores.size == 0:
        raise ValidationError("ranking metrics need at least one sample")
    if not np.isfinite(scores).all():
        raise ValidationError("anomaly scores must be finite")
    return scores, labels


def auroc(scores, is_unknown) -> float | None:
    """Probability that a random unknown pixel outscores a random known pixel,
    ties counted half (the rank-statistic form)."""
    scores, labels = _check_samples(scores, is_unknown)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    # average ranks (1-based) with ties sharing their mid-rank
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [scores.size]))
    ranks = np.repeat(0.5 * (starts + 1 + ends), ends - starts)
    rank_sum = float(ranks[labels[order]].sum())
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def _threshold_counts(scores, labels):
    """Per descending unique threshold t: predicted positives and true
    positives of the rule score >= t."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = labels[order].astype(np.int64)
    cum_tp = np.cumsum(sorted_pos)
    cum_pp = np.arange(1, scores.size + 1)
    last_of_run = np.flatnonzero(np.diff(sorted_scores)) if scores.size > 1 else np.array([], dtype=np.int64)
    keep = np.concatenate((last_of_run, [scores.size - 1]))
    return sorted_scores[keep], cum_pp[keep], cum_tp[keep]


def aupr(scores, is_unknown) -> float | None:
    """Area under precision-recall with unknown as the positive class,
    step-interpolated over descending score thresholds."""
    scores, labels = _check_samples(scores, is_unknown)
    n_pos = int(labels.sum())
    if n_pos == 0:
        return None
    _, pp, tp = _threshold_counts(scores, labels)
    area = 0.0
    prev_tp = 0
    terms = []
    for pp_i, tp_i in zip(pp.tolist(), tp.tolist()):
        terms.append((tp_i / pp_i) * (tp_i - prev_tp))
        prev_tp = tp_i
    area = math.fsum(terms) / n_pos
    return area


def fpr_at_95_tpr(scores, is_unknown) -> float | None:
    """False positive rate at the first descending threshold reaching 95% TPR."""
    scores, labels = _check_samples(scores, is_unknown)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    _, pp, tp = _threshold_counts(scores, labels)
    for pp_i, tp_i in zip(pp.tolist(), tp.tolist()):
        if 20 * tp_i >= 19 * n_pos:  # tpr >= 0.95, exactly
            fp_i = pp_i - tp_i
            return fp_i / n_neg
    return 1.0  # unreachable: the lowest threshold admits every sample
