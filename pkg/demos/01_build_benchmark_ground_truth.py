"""
Building open-set ground truth from an ordinary annotation
==========================================================

A semantic annotation plus a known/unknown class split is everything needed
to build generalized open-set ground truth: known classes keep (remapped)
labels, unknown classes turn into class-agnostic clusters.
"""

import numpy as np

from gosskit import (
    VOID,
    ClassSplit,
    SemanticMap,
    SplitPolicy,
    admit_image,
    build_goss_gt,
    connectivity_label,
    remap_semantic,
)


def show(title, grid):
    print(f"\n{title}")
    for row in np.asarray(grid):
        print("  " + " ".join("." if v == VOID else str(int(v)) for v in row))


# A tiny 8x8 annotation using the original dataset ids 10, 20 (known)
# and 40, 50 (unknown). Two unknown regions touch each other.
annotation = np.full((8, 8), 10, dtype=np.uint16)
annotation[0:3, 0:3] = 40          # an unknown blob
annotation[0:3, 3:5] = 50          # a different unknown class right next to it
annotation[5:8, 5:8] = 20          # a second known class
annotation[4, 0] = VOID            # an unlabeled pixel

gt = SemanticMap(annotation, VOID - 1)  # permissive count: raw dataset ids
split = ClassSplit(known=(10, 20), unknown=(40, 50), name="demo-2/2")
policy = SplitPolicy(mode="test", dataset_style="filter")

show("original annotation (dataset ids)", annotation)

# The test-split admission rule: an image qualifies only if unknown pixels
# are present at all.
print("\nadmitted into the test split:", admit_image(gt, split, policy))

# Known ids become 0..N-1, unknown ids collapse to the single indicator N=2.
semantic = remap_semantic(gt, split, policy)
show("remapped semantic map (N=2 marks 'unknown')", semantic.data)

# Connectivity labeling keeps the two touching unknown classes apart: they
# come from different original classes, so they become different clusters.
clusters = connectivity_label(gt, split, connectivity=4)
show("unknown clusters", clusters.data)

# Both steps compose into the final ground-truth map of (class, cluster) pairs.
goss = build_goss_gt(gt, split)
show("goss class layer", goss.class_map)
show("goss cluster layer", goss.cluster_map)

# Training data instead hides unknown pixels entirely.
train = remap_semantic(gt, split, SplitPolicy(mode="train", dataset_style="keep-all"))
show("training view (unknown pixels are void)", train.data)
