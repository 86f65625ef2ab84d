"""Core label-map types shared by every other module.

All maps are immutable numpy-backed grids. Class ids live in
``{0, ..., N-1}`` for the N known classes, ``N`` marks the unknown class,
and ``VOID`` marks pixels outside evaluation (unlabeled ground truth, or
the cluster slot of a known pixel). Cluster ids are arbitrary non-negative
integers with the same ``VOID`` sentinel.

Construction adopts compatible arrays zero-copy as read-only views: do not
mutate an array after handing it to a map (pass a copy if unsure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Sentinel for "no class / no cluster". Chosen as the 16-bit maximum so label
# maps serialize to ordinary 16-bit grayscale PNGs with 0..65534 left for ids.
VOID = 65535


class ValidationError(ValueError):
    """Input violates a documented contract (bad ids, shape mismatch, ...)."""


class FormatError(ValueError):
    """A file on disk is malformed (wrong magic, truncation, wrong PNG kind)."""


class FusionError(ValidationError):
    """An unknown-identified pixel has no cluster id to pair with."""


def check_class_count(n_classes: int) -> int:
    """Validate a known-class count N: at least one class, below the sentinel."""
    n = int(n_classes)
    if not 1 <= n < VOID:
        raise ValidationError(f"class count must be in [1, {VOID}), got {n_classes}")
    return n


def _readonly(data, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=dtype)
    if arr is data or arr.base is not None:
        # zero-copy path: freeze our own view, never the caller's array
        arr = arr.view()
    arr.setflags(write=False)
    return arr


def _readonly_ids(data, dtype, what: str) -> np.ndarray:
    # guard the narrowing cast: wider ids must not wrap into the valid range
    arr = np.asarray(data)
    if arr.dtype != dtype:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError(f"{what} must hold integer ids, got dtype {arr.dtype}")
        if arr.size and (int(arr.min()) < 0 or int(arr.max()) > np.iinfo(dtype).max):
            raise ValidationError(
                f"{what} contains ids outside the {np.dtype(dtype).name} range"
            )
    return _readonly(arr, dtype)


def _check_grid(arr: np.ndarray, what: str) -> None:
    if arr.ndim != 2:
        raise ValidationError(f"{what} must be a 2-D grid, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{what} must have positive dimensions, got {arr.shape}")


def require_same_shape(a, b) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")


def require_same_n(a, b) -> None:
    if a.n_classes != b.n_classes:
        raise ValidationError(
            f"class-count mismatch: {a.n_classes} vs {b.n_classes}"
        )


@dataclass(frozen=True, eq=False)
class SemanticMap:
    """Per-pixel class ids: known ids < N, N for unknown, VOID for unlabeled."""

    data: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = check_class_count(self.n_classes)
        arr = _readonly_ids(self.data, np.uint16, "semantic map")
        _check_grid(arr, "semantic map")
        bad = arr[(arr > n) & (arr != VOID)]
        if bad.size:
            raise ValidationError(
                f"semantic map contains id {int(bad[0])} outside 0..{n} / VOID"
            )
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "n_classes", n)

    @property
    def shape(self):
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class ClusterMap:
    """Per-pixel cluster ids; VOID pixels belong to no cluster."""

    data: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = check_class_count(self.n_classes)
        arr = _readonly_ids(self.data, np.uint32, "cluster map")
        _check_grid(arr, "cluster map")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "n_classes", n)

    @property
    def shape(self):
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class ScoreVolume:
    """C x H x W stack of per-pixel confidences or logits.

    When ``softmax_normalized`` is set, every pixel's channel vector must be a
    probability distribution (entries in [0, 1], summing to 1 within 1e-5).
    """

    data: np.ndarray
    softmax_normalized: bool = False

    def __post_init__(self):
        arr = _readonly(self.data, np.float32)
        if arr.ndim != 3:
            raise ValidationError(f"score volume must be CxHxW, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValidationError(f"score volume dimensions must be positive, got {arr.shape}")
        if self.softmax_normalized:
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise ValidationError("softmax-normalized volume has entries outside [0, 1]")
            sums = arr.sum(axis=0, dtype=np.float64)
            if np.any(np.abs(sums - 1.0) > 1e-5):
                worst = float(np.max(np.abs(sums - 1.0)))
                raise ValidationError(
                    f"softmax-normalized volume has channel sums off by {worst:.3g}"
                )
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class GossMap:
    """Per-pixel (class, cluster) pairs.

    A consistent map pairs known classes with VOID clusters, the unknown
    class N with a real cluster id, and VOID with VOID; construction does
    not enforce this so that :func:`validate_pair_consistency` can be used
    as a real predicate on candidate outputs.
    """

    class_map: np.ndarray
    cluster_map: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = check_class_count(self.n_classes)
        cls = _readonly_ids(self.class_map, np.uint16, "goss class map")
        clu = _readonly_ids(self.cluster_map, np.uint32, "goss cluster map")
        _check_grid(cls, "goss class map")
        require_same_shape(cls, clu)
        bad = cls[(cls > n) & (cls != VOID)]
        if bad.size:
            raise ValidationError(
                f"goss map contains class id {int(bad[0])} outside 0..{n} / VOID"
            )
        object.__setattr__(self, "class_map", cls)
        object.__setattr__(self, "cluster_map", clu)
        object.__setattr__(self, "n_classes", n)

    @property
    def shape(self):
        return self.class_map.shape

    @property
    def height(self) -> int:
        return self.class_map.shape[0]

    @property
    def width(self) -> int:
        return self.class_map.shape[1]

    def semantic(self) -> SemanticMap:
        return SemanticMap(self.class_map, self.n_classes)

    def clusters(self) -> ClusterMap:
        return ClusterMap(self.cluster_map, self.n_classes)


def validate_pair_consistency(m: GossMap) -> bool:
    """True iff every pixel's (class, cluster) pair is consistent.

    Known class => VOID cluster, unknown class => non-VOID cluster,
    VOID class => VOID cluster.
    """
    cls = m.class_map
    clu = m.cluster_map
    known = cls < m.n_classes
    unknown = cls == m.n_classes
    void = cls == VOID
    ok_known = clu[known] == VOID
    ok_unknown = clu[unknown] != VOID
    ok_void = clu[void] == VOID
    return bool(ok_known.all() and ok_unknown.all() and ok_void.all())


@dataclass(frozen=True)
class ClassSplit:
    """A partition of a dataset's original class ids into known and unknown."""

    known: tuple = ()
    unknown: tuple = ()
    name: str = ""

    def __post_init__(self):
        known = tuple(int(c) for c in self.known)
        unknown = tuple(int(c) for c in self.unknown)
        for c in known + unknown:
            if not 0 <= c < VOID:
                raise ValidationError(f"class id {c} outside storable range 0..{VOID - 1}")
        if len(set(known)) != len(known):
            raise ValidationError("known class list contains duplicates")
        if len(set(unknown)) != len(unknown):
            raise ValidationError("unknown class list contains duplicates")
        if set(known) & set(unknown):
            overlap = sorted(set(known) & set(unknown))
            raise ValidationError(f"classes listed as both known and unknown: {overlap}")
        if not known:
            raise ValidationError("a split needs at least one known class")
        object.__setattr__(self, "known", known)
        object.__setattr__(self, "unknown", unknown)

    @property
    def n_classes(self) -> int:
        return len(self.known)

    def known_index(self) -> dict:
        """Original id -> remapped id in 0..N-1 (position in the known list)."""
        return {c: i for i, c in enumerate(self.known)}
