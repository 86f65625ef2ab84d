"""Random synthetic inputs shared across test modules."""

from __future__ import annotations

import numpy as np

from gosskit import VOID, ClusterMap, GossMap, ScoreVolume, label_components


def random_class_map(rng, height, width, n_classes):
    """Blobby known-class layout: nearest of a few random seed points."""
    k = int(rng.integers(2, 2 * n_classes + 2))
    rows = rng.integers(0, height, size=k)
    cols = rng.integers(0, width, size=k)
    labels = rng.integers(0, n_classes, size=k)
    rr, cc = np.mgrid[0:height, 0:width]
    dist = (rr[..., None] - rows) ** 2 + (cc[..., None] - cols) ** 2
    return labels[np.argmin(dist, axis=-1)].astype(np.uint16)


def _paint_rects(rng, target, value, count, max_side):
    h, w = target.shape
    for _ in range(count):
        rh = int(rng.integers(1, max_side + 1))
        rw = int(rng.integers(1, max_side + 1))
        r0 = int(rng.integers(0, max(1, h - rh + 1)))
        c0 = int(rng.integers(0, max(1, w - rw + 1)))
        target[r0:r0 + rh, c0:c0 + rw] = value


def random_goss_map(rng, height=64, width=64, n_classes=5, max_clusters=6,
                    void_rects=0) -> GossMap:
    """A valid random ground-truth-style map with at least one unknown cluster."""
    cls = random_class_map(rng, height, width, n_classes)
    n_rects = int(rng.integers(1, max_clusters + 1))
    _paint_rects(rng, cls, n_classes, n_rects, max(2, min(height, width) // 3))
    if void_rects:
        _paint_rects(rng, cls, VOID, void_rects, max(2, min(height, width) // 4))
    if not (cls == n_classes).any():  # void may have covered every unknown rect
        cls[0, 0] = n_classes
    if not (cls < n_classes).any():
        cls[-1, -1] = 0
    clusters = label_components(cls == n_classes, cls == n_classes, 4)
    return GossMap(cls, clusters, n_classes)


def perturb_goss_map(rng, gt: GossMap, rects=3) -> GossMap:
    """A prediction-like variation of gt: repaint a few regions, then recluster."""
    n = gt.n_classes
    cls = gt.class_map.copy()
    for _ in range(rects):
        value = int(rng.integers(0, n + 1))
        _paint_rects(rng, cls, value, 1, max(2, gt.height // 3))
    cls[gt.class_map == VOID] = VOID  # keep the void layout of the scene
    if not (cls != VOID).any():
        cls[0, 0] = 0
    clusters = label_components(cls == n, cls == n, 4)
    return GossMap(cls, clusters, n)


def full_cluster_map(rng, goss: GossMap, subdivide=2) -> ClusterMap:
    """A whole-image clustering (pre-fusion style): class-agnostic blocks."""
    h, w = goss.shape
    block = max(4, min(h, w) // max(1, int(rng.integers(2, 5))))
    rr, cc = np.mgrid[0:h, 0:w]
    tiles = ((rr // block) * (w // block + 2) + cc // block).astype(np.int64)
    labels = label_components(tiles, np.ones((h, w), dtype=bool), 4)
    return ClusterMap(labels, goss.n_classes)


def random_softmax_volume(rng, channels, height, width) -> ScoreVolume:
    raw = rng.gamma(1.0, 1.0, size=(channels, height, width)) + 1e-6
    data = (raw / raw.sum(axis=0, keepdims=True)).astype(np.float32)
    # renormalize once more in float32 so per-pixel sums stay within tolerance
    data = data / data.sum(axis=0, keepdims=True)
    return ScoreVolume(data.astype(np.float32), softmax_normalized=True)


def random_logit_volume(rng, channels, height, width) -> ScoreVolume:
    data = rng.normal(0.0, 3.0, size=(channels, height, width)).astype(np.float32)
    return ScoreVolume(data)
