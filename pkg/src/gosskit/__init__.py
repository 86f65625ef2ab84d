"""Toolkit for building generalized open-set segmentation benchmarks and
evaluating predictions with the GQ metric family."""

from .benchgen import (
    SplitPolicy,
    admit_image,
    build_goss_gt,
    bundled_split,
    class_agnostic_label,
    connectivity_label,
    label_components,
    load_class_split,
    remap_semantic,
)
from .config import RunConfig
from .core import (
    VOID,
    ClassSplit,
    ClusterMap,
    FormatError,
    FusionError,
    GossMap,
    ScoreVolume,
    SemanticMap,
    ValidationError,
    validate_pair_consistency,
)
from .fuse import fuse, mask_clusters, split_clusters
from .identify import (
    AnomalyMap,
    IdentifyMethod,
    adjust_confidence,
    anomaly_map,
    external_anomaly_identify,
    identify,
    maxlogit_identify,
    msp_identify,
    nplus1_identify,
)
from .matching import (
    MatchAccumulator,
    Segment,
    extract_segments,
    iou,
    match_goss,
    match_segments,
)
from .metrics import (
    auroc,
    aupr,
    build_report,
    fpr_at_95_tpr,
    gq,
    gq_clu,
    gq_known,
    gq_unknown,
    match_class_agnostic,
    miou_clusters,
)
from .tensorio import (
    MetricReport,
    PerClassRow,
    read_anomaly_scores,
    read_label_map,
    read_metric_report,
    read_run_config,
    read_score_volume,
    write_anomaly_scores,
    write_label_map,
    write_metric_report,
    write_per_class_csv,
    write_score_volume,
)

__version__ = "0.1.0"
