"""Run configuration: pipeline knobs with their standard defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .core import ValidationError

METHODS = ("msp", "maxlogit", "nplus1", "nplus1_adjusted", "external")

# JSON key -> RunConfig attribute. "lambda" is a Python keyword, hence lambda_.
_KEYMAP = {
    "tau": "tau",
    "beta_uk": "beta_uk",
    "lambda": "lambda_",
    "connectivity": "connectivity",
    "min_segment_area": "min_segment_area",
    "method": "method",
    "strict_n": "strict_n",
    "fallback_gq": "fallback_gq",
    "split_masked_clusters": "split_masked_clusters",
    "workers": "workers",
}


@dataclass(frozen=True)
class RunConfig:
    """Pipeline configuration.

    ``tau`` thresholds pixel identification, ``beta_uk`` scales the
    unknown-channel confidence, ``lambda_`` weights the known term of the
    combined GQ score. ``explicit`` records which keys the user actually
    set (defaults vs. deliberate choices matter for methods like maxlogit
    whose threshold has no meaningful default scale).
    """

    tau: float = 0.5
    beta_uk: float = 5.0
    lambda_: float = 0.5
    connectivity: int = 4
    min_segment_area: int = 0
    method: str = "msp"
    strict_n: bool = False
    fallback_gq: bool = False
    split_masked_clusters: bool = False
    workers: int = 1
    explicit: frozenset = field(default_factory=frozenset, compare=False, repr=False)

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise ValidationError(f"tau must be finite, got {self.tau}")
        if not (math.isfinite(self.beta_uk) and self.beta_uk > 1.0):
            raise ValidationError(f"beta_uk must be > 1, got {self.beta_uk}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValidationError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.connectivity not in (4, 8):
            raise ValidationError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.min_segment_area < 0:
            raise ValidationError(f"min_segment_area must be >= 0, got {self.min_segment_area}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")

    def was_set(self, key: str) -> bool:
        return key in self.explicit

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        """Build a config from a parsed JSON object (strict: no unknown keys)."""
        if not isinstance(raw, dict):
            raise ValidationError("config document must be a JSON object")
        unknown = sorted(set(raw) - set(_KEYMAP))
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        kwargs = {}
        for key, value in raw.items():
            attr = _KEYMAP[key]
            kwargs[attr] = _coerce(attr, value)
        kwargs["explicit"] = frozenset(_KEYMAP[k] for k in raw)
        return cls(**kwargs)

    def replace(self, **overrides) -> "RunConfig":
        """Copy with overrides; the overridden keys become explicit."""
        current = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "explicit"}
        current.update(overrides)
        explicit = self.explicit | frozenset(overrides)
        return RunConfig(explicit=explicit, **current)


def _coerce(attr: str, value):
    if attr in ("strict_n", "fallback_gq", "split_masked_clusters"):
        if not isinstance(value, bool):
            raise ValidationError(f"config key for {attr} must be a boolean, got {value!r}")
        return value
    if attr in ("connectivity", "min_segment_area", "workers"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"config key for {attr} must be an integer, got {value!r}")
        return value
    if attr == "method":
        if not isinstance(value, str):
            raise ValidationError(f"method must be a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"config key for {attr} must be a number, got {value!r}")
    return float(value)
