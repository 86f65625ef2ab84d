"""
Fusion and the GQ metric family
===============================

The full in-memory pipeline: mask a whole-image clustering down to the
identified unknown region, fuse, then match segments against ground truth
and score the result.

The second half reproduces the classic failure case: one predicted cluster
straddling two ground-truth segments earns nothing, because matching demands
a strict majority overlap (IoU > 0.5).
"""

import numpy as np

from gosskit import (
    VOID,
    ClusterMap,
    GossMap,
    SemanticMap,
    build_report,
    fuse,
    gq,
    gq_known,
    gq_unknown,
    mask_clusters,
    match_goss,
)

N = 2
H = W = 8

# Ground truth: class 0 background, class 1 on the left, one unknown blob
# (cluster 0) on the right.
gt_cls = np.zeros((H, W), dtype=np.uint16)
gt_cls[:, :3] = 1
gt_cls[2:6, 5:8] = N
gt_clu = np.full((H, W), VOID, dtype=np.uint32)
gt_clu[2:6, 5:8] = 0
gt = GossMap(gt_cls, gt_clu, N)

# A prediction pipeline: identified semantic map (slightly wrong at one
# corner) plus a whole-image clustering from some grouping model.
side = SemanticMap(np.where(gt_cls == N, N, gt_cls), N)
whole_image_clusters = ClusterMap(
    np.where(np.arange(W) < 4, 3, 7)[None, :].repeat(H, axis=0).astype(np.uint32), N
)

masked = mask_clusters(whole_image_clusters, side)
prediction = fuse(side, masked)
print("prediction consistent pairs:", prediction.class_map.shape)

acc = match_goss(prediction, gt)
kn, uk = gq_known(acc), gq_unknown(acc)
print(f"GQ-known {kn:.3f}  GQ-unknown {uk:.3f}  GQ {gq(kn, uk, 0.5):.3f}")

# -- the straddling case ---------------------------------------------------
gt_cls = np.zeros((4, 4), dtype=np.uint16)
gt_clu = np.full((4, 4), VOID, dtype=np.uint32)
gt_cls[0:2, 0:2] = N; gt_clu[0:2, 0:2] = 0     # unknown segment A
gt_cls[2:4, 0:2] = N; gt_clu[2:4, 0:2] = 1     # unknown segment B
toy_gt = GossMap(gt_cls, gt_clu, N)

pr_cls = np.zeros((4, 4), dtype=np.uint16)
pr_clu = np.full((4, 4), VOID, dtype=np.uint32)
pr_cls[1:3, 0:2] = N; pr_clu[1:3, 0:2] = 0     # one column straddling A and B
toy_pred = GossMap(pr_cls, pr_clu, N)

acc = match_goss(toy_pred, toy_gt)
print("\nstraddling prediction: IoU with each segment is 2/6, so")
print(f"  tp={acc.tp_uk} fp={acc.fp_uk} fn={acc.fn_uk} -> GQ-unknown {gq_unknown(acc):.1f}")

report = build_report(acc)
print("\nfull report fields:", sorted(report.to_dict().keys()))
