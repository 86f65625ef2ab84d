"""Pixel identification: decide per pixel whether it is a known class (and
which) or unknown, from an N- or N+1-channel score volume.

Anomaly scores follow the convention "higher means more likely unknown".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ScoreVolume, SemanticMap, ValidationError, _readonly, check_class_count


@dataclass(frozen=True, eq=False)
class AnomalyMap:
    """Per-pixel anomaly score; finite values only."""

    score: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.score, np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"anomaly map must be HxW, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("anomaly map contains non-finite scores")
        object.__setattr__(self, "score", arr)

    @property
    def shape(self):
        return self.score.shape


@dataclass(frozen=True)
class IdentifyMethod:
    """A named identification recipe plus its parameters.

    msp and external threshold on tau; maxlogit thresholds the negated max
    logit on tau (no default makes sense on the unbounded logit scale);
    nplus1_adjusted scales the unknown channel by beta_uk > 1 before argmax.
    """

    kind: str
    tau: float | None = None
    beta_uk: float | None = None

    def __post_init__(self):
        if self.kind not in ("msp", "maxlogit", "nplus1", "nplus1_adjusted", "external"):
            raise ValidationError(f"unknown identification method {self.kind!r}")
        if self.kind in ("msp", "maxlogit", "external"):
            if self.tau is None or not math.isfinite(self.tau):
                raise ValidationError(f"{self.kind} requires a finite threshold tau")
            if self.kind == "msp" and not 0.0 < self.tau < 1.0:
                raise ValidationError(f"msp threshold must lie in (0, 1), got {self.tau}")
        if self.kind == "nplus1_adjusted":
            if self.beta_uk is None or not self.beta_uk > 1.0:
                raise ValidationError(f"confidence adjustment requires beta_uk > 1, got {self.beta_uk}")


def _check_n(vol: ScoreVolume, n_classes: int) -> int:
    check_class_count(n_classes)
    return n_classes


def msp_identify(vol: ScoreVolume, tau: float) -> SemanticMap:
    """Maximum softmax probability: argmax class where max prob >= tau, else unknown."""
    if not vol.softmax_normalized:
        raise ValidationError("msp identification needs a softmax-normalized volume")
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"msp threshold must lie in [0, 1], got {tau}")
    n = _check_n(vol, vol.channels)
    best = np.argmax(vol.data, axis=0)
    confident = np.max(vol.data, axis=0) >= np.float32(tau)
    labels = np.where(confident, best, n).astype(np.uint16)
    return SemanticMap(labels, n)


def maxlogit_identify(vol: ScoreVolume, tau: float) -> SemanticMap:
    """Negated max logit as anomaly score; unknown where it reaches tau."""
    if not math.isfinite(tau):
        raise ValidationError(f"maxlogit threshold must be finite, got {tau}")
    n = _check_n(vol, vol.channels)
    best = np.argmax(vol.data, axis=0)
    anomalous = -np.max(vol.data, axis=0) >= np.float32(tau)
    labels = np.where(anomalous, n, best).astype(np.uint16)
    return SemanticMap(labels, n)


def adjust_confidence(vol: ScoreVolume, beta_uk: float) -> ScoreVolume:
    """Scale the unknown (last) channel of an N+1 softmax volume by beta_uk.

    The output is no longer a distribution, so the softmax flag is cleared.
    """
    if not beta_uk > 1.0:
        raise ValidationError(f"beta_uk must be > 1, got {beta_uk}")
    if not vol.softmax_normalized:
        raise ValidationError("confidence adjustment needs a softmax-normalized volume")
    if vol.channels < 2:
        raise ValidationError("confidence adjustment needs an N+1 volume (>= 2 channels)")
    data = vol.data.copy()
    data[-1] *= np.float32(beta_uk)
    return ScoreVolume(data, softmax_normalized=False)


def nplus1_identify(vol: ScoreVolume, beta_uk: float | None = None) -> SemanticMap:
    """Argmax over N+1 channels; the last channel is the unknown class."""
    if vol.channels < 2:
        raise ValidationError("N+1 identification needs at least 2 channels")
    n = _check_n(vol, vol.channels - 1)
    if beta_uk is not None:
        vol = adjust_confidence(vol, beta_uk)
    labels = np.argmax(vol.data, axis=0).astype(np.uint16)
    return SemanticMap(labels, n)


def external_anomaly_identify(vol: ScoreVolume, anomaly: AnomalyMap, tau: float) -> SemanticMap:
    """Threshold a precomputed anomaly map; classes come from the volume's argmax.

    Covers identification schemes whose scoring happens outside this toolkit
    (metric-learning scores and the like).
    """
    if not math.isfinite(tau):
        raise ValidationError(f"threshold must be finite, got {tau}")
    if anomaly.shape != (vol.height, vol.width):
        raise ValidationError(
            f"anomaly map shape {anomaly.shape} does not match volume {(vol.height, vol.width)}"
        )
    n = _check_n(vol, vol.channels)
    best = np.argmax(vol.data, axis=0)
    labels = np.where(anomaly.score >= np.float32(tau), n, best).astype(np.uint16)
    return SemanticMap(labels, n)


def anomaly_map(vol: ScoreVolume, method: IdentifyMethod) -> AnomalyMap:
    """Per-pixel anomaly score under the given method's convention."""
    if method.kind == "msp":
        if not vol.softmax_normalized:
            raise ValidationError("msp anomaly scores need a softmax-normalized volume")
        return AnomalyMap(np.float32(1.0) - np.max(vol.data, axis=0))
    if method.kind == "maxlogit":
        return AnomalyMap(-np.max(vol.data, axis=0))
    if method.kind in ("nplus1", "nplus1_adjusted"):
        if vol.channels < 2:
            raise ValidationError("N+1 anomaly scores need at least 2 channels")
        if method.kind == "nplus1_adjusted":
            vol = adjust_confidence(vol, method.beta_uk)
        return AnomalyMap(vol.data[-1])
    raise ValidationError(f"anomaly scores for method {method.kind!r} must be supplied externally")


def identify(vol: ScoreVolume, method: IdentifyMethod,
             anomaly: AnomalyMap | None = None) -> SemanticMap:
    """Dispatch to the method's identification rule."""
    if method.kind == "msp":
        return msp_identify(vol, method.tau)
    if method.kind == "maxlogit":
        return maxlogit_identify(vol, method.tau)
    if method.kind == "nplus1":
        return nplus1_identify(vol)
    if method.kind == "nplus1_adjusted":
        return nplus1_identify(vol, method.beta_uk)
    if anomaly is None:
        raise ValidationError("external identification needs a precomputed anomaly map")
    return external_anomaly_identify(vol, anomaly, method.tau)
