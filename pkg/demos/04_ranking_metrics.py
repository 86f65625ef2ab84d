"""
Threshold-free ranking metrics over anomaly scores
==================================================

Before committing to a threshold, the separation between known and unknown
pixels is judged by how well the anomaly scores rank them: AUROC, AUPR and
the false-positive rate once 95% of unknown pixels are caught.
"""

import numpy as np

from gosskit import aupr, auroc, fpr_at_95_tpr

rng = np.random.default_rng(7)

# Known pixels score low, unknown pixels score high, with overlap controlled
# by the gap between the two distributions.
for gap in (3.0, 1.0, 0.0):
    known = rng.normal(0.0, 1.0, size=4000)
    unknown = rng.normal(gap, 1.0, size=1000)
    scores = np.concatenate([known, unknown])
    labels = np.concatenate([np.zeros(known.size, bool), np.ones(unknown.size, bool)])
    print(
        f"gap {gap:.1f}:  AUROC {auroc(scores, labels):.3f}  "
        f"AUPR {aupr(scores, labels):.3f}  "
        f"FPR@95TPR {fpr_at_95_tpr(scores, labels):.3f}"
    )

# Degenerate cases have fixed answers: identical scores rank nothing...
flat = np.zeros(100)
half = np.arange(100) < 50
print("\nidentical scores:  AUROC", auroc(flat, half), " FPR@95TPR", fpr_at_95_tpr(flat, half))

# ...and AUROC only cares about order, never about the score scale.
scores = rng.normal(size=200)
labels = rng.random(200) < 0.3
assert auroc(scores, labels) == auroc(np.exp(scores), labels)
print("AUROC is invariant under any strictly increasing rescaling.")
