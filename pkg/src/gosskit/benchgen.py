"""Benchmark construction: turn ordinary semantic annotations into open-set
ground truth.

Known classes keep (remapped) semantic labels; unknown classes are converted
to class-agnostic clusters by connected-component labeling of each original
unknown class, then the original semantics are discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import ndimage

from .core import (
    VOID,
    ClassSplit,
    ClusterMap,
    GossMap,
    SemanticMap,
    ValidationError,
)

_STRUCTURE_4 = ndimage.generate_binary_structure(2, 1)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)

BUNDLED_SPLITS = (
    "coco_stuff_voc_20_60",
    "coco_stuff_manual_20_60",
    "coco_stuff_random_111_60",
    "cityscapes_manual_16_3",
    "cityscapes_manual_13_6",
)


@dataclass(frozen=True)
class SplitPolicy:
    """How images are selected and how unknown pixels are encoded.

    ``filter`` style drops training images containing any unknown pixel and
    keeps only test images that do contain unknown pixels; ``keep-all`` keeps
    every image and encodes unknown training pixels as void.
    """

    mode: str = "test"  # "train" or "test"
    dataset_style: str = "filter"  # "filter" or "keep-all"
    test_requirement: str = "requires-unknown"

    def __post_init__(self):
        if self.mode not in ("train", "test"):
            raise ValidationError(f"mode must be 'train' or 'test', got {self.mode!r}")
        if self.dataset_style not in ("filter", "keep-all"):
            raise ValidationError(
                f"dataset_style must be 'filter' or 'keep-all', got {self.dataset_style!r}"
            )
        if self.test_requirement != "requires-unknown":
            raise ValidationError(
                f"unsupported test_requirement {self.test_requirement!r}"
            )


def load_class_split(path) -> ClassSplit:
    """Load a split JSON document: {"name": ..., "known": [...], "unknown": [...]}."""
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    return _split_from_dict(raw, str(path))


def bundled_split(name: str) -> ClassSplit:
    """Load one of the split definitions shipped with the package."""
    if name not in BUNDLED_SPLITS:
        raise ValidationError(f"no bundled split {name!r}; available: {BUNDLED_SPLITS}")
    text = resources.files("gosskit").joinpath(f"data/splits/{name}.json").read_text("utf-8")
    return _split_from_dict(json.loads(text), name)


def _split_from_dict(raw: dict, source: str) -> ClassSplit:
    for key in ("name", "known", "unknown"):
        if key not in raw:
            raise ValidationError(f"{source}: split document missing key {key!r}")
    return ClassSplit(known=raw["known"], unknown=raw["unknown"], name=raw["name"])


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return _STRUCTURE_4
    if connectivity == 8:
        return _STRUCTURE_8
    raise ValidationError(f"connectivity must be 4 or 8, got {connectivity}")


def label_components(values: np.ndarray, mask: np.ndarray, connectivity: int = 4,
                     min_area: int = 0) -> np.ndarray:
    """Connected components of equal ``values`` within ``mask``.

    Two pixels join a component only when they are adjacent under the chosen
    connectivity AND carry the same value, so regions of different values
    never merge even when they touch. Components smaller than ``min_area``
    are dropped to VOID. Returned ids are contiguous 0..K-1, assigned in
    raster-scan order of each component's first pixel; everything else is VOID.
    """
    structure = _structure(connectivity)
    values = np.asarray(values)
    mask = np.asarray(mask, dtype=bool)
    provisional = np.zeros(values.shape, dtype=np.int64)
    next_id = 0
    for v in np.unique(values[mask]):
        comp, count = ndimage.label((values == v) & mask, structure=structure)
        hit = comp > 0
        provisional[hit] = comp[hit] + next_id
        next_id += count

    flat = provisional.ravel()
    if min_area > 0 and next_id:
        areas = np.bincount(flat, minlength=next_id + 1)
        small = areas < min_area
        small[0] = False
        flat = np.where(small[flat], 0, flat)

    foreground = flat > 0
    labels, first_touch = np.unique(flat[foreground], return_index=True)
    if labels.size >= VOID:
        raise ValidationError(
            f"{labels.size} components exceed the 16-bit cluster-id range"
        )
    lut = np.full(next_id + 1, VOID, dtype=np.uint32)
    lut[labels[np.argsort(first_touch)]] = np.arange(labels.size, dtype=np.uint32)
    return lut[flat].reshape(values.shape)


def _check_ids_listed(gt: SemanticMap, split: ClassSplit) -> None:
    present = np.unique(gt.data)
    listed = set(split.known) | set(split.unknown) | {VOID}
    missing = [int(v) for v in present if int(v) not in listed]
    if missing:
        raise ValidationError(
            f"annotation contains class ids not listed in split {split.name!r}: {missing}"
        )


def remap_semantic(gt: SemanticMap, split: ClassSplit, policy: SplitPolicy) -> SemanticMap:
    """Remap original class ids onto the split's encoding.

    Known ids become their index in the split's known list; unknown ids
    become N on test data and void on training data; original void stays void.
    """
    _check_ids_listed(gt, split)
    n = split.n_classes
    lut = np.full(VOID + 1, VOID, dtype=np.uint16)
    for idx, original in enumerate(split.known):
        lut[original] = idx
    unknown_target = n if policy.mode == "test" else VOID
    for original in split.unknown:
        lut[original] = unknown_target
    return SemanticMap(lut[gt.data], n)


def connectivity_label(gt: SemanticMap, split: ClassSplit, connectivity: int = 4,
                       min_segment_area: int = 0) -> ClusterMap:
    """Cluster ground truth for the unknown region of a test annotation.

    Each connected component of one original unknown class becomes a cluster;
    adjacent components of different unknown classes stay distinct.
    """
    _check_ids_listed(gt, split)
    unknown_mask = np.isin(gt.data, np.asarray(split.unknown, dtype=np.uint16))
    labels = label_components(gt.data, unknown_mask, connectivity, min_segment_area)
    return ClusterMap(labels, split.n_classes)


def admit_image(gt: SemanticMap, split: ClassSplit, policy: SplitPolicy) -> bool:
    """Whether an annotated image belongs in the requested benchmark split."""
    if policy.dataset_style == "keep-all":
        return True
    has_unknown = bool(
        np.isin(gt.data, np.asarray(split.unknown, dtype=np.uint16)).any()
    )
    if policy.mode == "train":
        return not has_unknown
    return has_unknown


def build_goss_gt(gt: SemanticMap, split: ClassSplit, connectivity: int = 4,
                  min_segment_area: int = 0) -> GossMap:
    """Compose remapping and cluster labeling into test ground truth.

    Unknown pixels whose component was dropped by the area filter fall back
    to void so the output always satisfies pair consistency.
    """
    policy = SplitPolicy(mode="test", dataset_style="filter")
    semantic = remap_semantic(gt, split, policy)
    clusters = connectivity_label(gt, split, connectivity, min_segment_area)
    cls = semantic.data.copy()
    cls[(cls == split.n_classes) & (clusters.data == VOID)] = VOID
    return GossMap(cls, clusters.data, split.n_classes)


def class_agnostic_label(gt: GossMap, connectivity: int = 4) -> ClusterMap:
    """Segment the whole ground truth with semantics ignored.

    Known regions and unknown clusters alike become plain components: two
    pixels share a component when they share the same (class, cluster)
    identity and are connected. Used as the reference segmentation for
    clustering-only quality.
    """
    composite = gt.class_map.astype(np.int64)
    unknown = gt.class_map == gt.n_classes
    # offset keeps cluster identities disjoint from class ids
    composite[unknown] = (1 << 32) + gt.cluster_map[unknown].astype(np.int64)
    labels = label_components(composite, gt.class_map != VOID, connectivity)
    return ClusterMap(labels, gt.n_classes)
