"""
Identifying unknown pixels from score volumes
=============================================

Every identification recipe turns a per-pixel score stack into a class map
whose extra class N means "unknown". The recipes differ in what they
threshold: softmax confidence, raw logits, or an explicit unknown channel.
"""

import numpy as np

from gosskit import (
    IdentifyMethod,
    ScoreVolume,
    adjust_confidence,
    anomaly_map,
    maxlogit_identify,
    msp_identify,
    nplus1_identify,
)

rng = np.random.default_rng(0)
N = 3
H = W = 6

# Synthetic N-channel softmax volume: the left half is confidently class 0,
# the right half is deliberately ambiguous.
probs = np.full((N, H, W), 1.0 / N, dtype=np.float32)
probs[0, :, : W // 2] = 0.9
probs[1:, :, : W // 2] = 0.05
volume = ScoreVolume(probs, softmax_normalized=True)

# Maximum softmax probability: ambiguous pixels fall below tau and flip to N.
side = msp_identify(volume, tau=0.5)
print("msp identified map (3 = unknown):")
print(side.data)

scores = anomaly_map(volume, IdentifyMethod("msp", tau=0.5))
print("\nmsp anomaly scores (1 - max probability):")
print(np.round(scores.score, 2))

# MaxLogit works on raw logits; its threshold lives on the logit scale, so
# there is no universal default:
logits = ScoreVolume(rng.normal(0.0, 2.0, size=(N, H, W)).astype(np.float32))
flagged = maxlogit_identify(logits, tau=-1.0)
print("\nmaxlogit unknown fraction:", float((flagged.data == N).mean()))

# An N+1 model carries its own unknown channel; scaling that channel by
# beta > 1 counteracts the closed-set bias before the argmax.
nplus1 = np.stack([
    np.full((H, W), 0.5, dtype=np.float32),
    np.full((H, W), 0.3, dtype=np.float32),
    np.full((H, W), 0.2, dtype=np.float32),
])
vol_np1 = ScoreVolume(nplus1, softmax_normalized=True)
plain = nplus1_identify(vol_np1)
boosted = nplus1_identify(vol_np1, beta_uk=5.0)
print("\nN+1 argmax without adjustment:", int(plain.data[0, 0]))
print("N+1 argmax with beta=5 (0.2 -> 1.0 beats 0.5):", int(boosted.data[0, 0]))

adjusted = adjust_confidence(vol_np1, beta_uk=5.0)
print("adjusted channel vector at (0,0):", adjusted.data[:, 0, 0].tolist())
