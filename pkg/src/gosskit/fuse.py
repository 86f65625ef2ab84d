"""Fusion: pair the identified semantic map with the cluster map.

Known-identified pixels keep their class and lose their cluster id; pixels
identified as unknown pair the unknown indicator with their cluster id.
"""

from __future__ import annotations

import numpy as np

from .benchgen import label_components
from .core import (
    VOID,
    ClusterMap,
    FusionError,
    GossMap,
    SemanticMap,
    require_same_n,
    require_same_shape,
)


def mask_clusters(g: ClusterMap, s_ide: SemanticMap) -> ClusterMap:
    """Keep cluster ids only where the identified class is unknown."""
    require_same_shape(g.data, s_ide.data)
    require_same_n(g, s_ide)
    kept = np.where(s_ide.data == s_ide.n_classes, g.data, np.uint32(VOID))
    return ClusterMap(kept, g.n_classes)


def split_clusters(g: ClusterMap, connectivity: int = 4) -> ClusterMap:
    """Re-split clusters into connected components (fresh contiguous ids).

    Masking can disconnect a cluster; by default disconnected parts keep a
    shared id, and this re-split is the ablation alternative.
    """
    labels = label_components(g.data, g.data != VOID, connectivity)
    return ClusterMap(labels, g.n_classes)


def fuse(s_ide: SemanticMap, g_uk: ClusterMap, fallback_singletons: bool = False,
         connectivity: int = 4) -> GossMap:
    """Merge identification and clustering into a consistent output map.

    Every unknown-identified pixel must carry a cluster id; uncovered pixels
    raise unless ``fallback_singletons`` assigns each connected uncovered
    component a fresh cluster of its own.
    """
    require_same_shape(s_ide.data, g_uk.data)
    require_same_n(s_ide, g_uk)
    n = s_ide.n_classes
    unknown = s_ide.data == n
    clusters = np.where(unknown, g_uk.data, np.uint32(VOID))
    uncovered = unknown & (clusters == VOID)
    if uncovered.any():
        if not fallback_singletons:
            raise FusionError(
                f"{int(uncovered.sum())} unknown-identified pixels have no cluster id"
            )
        patch = label_components(uncovered, uncovered, connectivity)
        used = clusters[clusters != VOID]
        offset = int(used.max()) + 1 if used.size else 0
        count = int(patch[uncovered].max()) + 1
        if offset <= VOID < offset + count:
            offset = VOID + 1  # fresh ids must never collide with the sentinel
        clusters = np.where(uncovered, patch + np.uint32(offset), clusters)
    return GossMap(s_ide.data, clusters, n)
