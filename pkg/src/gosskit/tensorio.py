"""File formats: 16-bit PNG label maps, GSV1 score volumes, JSON config/report.

Every reader/writer pair round-trips exactly: byte-for-byte for GSV1,
value-for-value for PNG label maps.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .config import RunConfig
from .core import (
    VOID,
    ClusterMap,
    FormatError,
    ScoreVolume,
    SemanticMap,
    ValidationError,
)

GSV1_MAGIC = b"GSV1"
_GSV1_HEADER = struct.Struct("<4sIIII")  # magic, channels, height, width, flags
_FLAG_SOFTMAX = 1
_MAX_ELEMENTS = 1 << 30  # refuse absurd headers before allocating

_GRAYSCALE_MODES = ("L", "I", "I;16", "I;16B", "I;16L")


def read_label_map(path, n_classes: int, kind: str = "semantic",
                   treat_255_as_void: bool = False):
    """Read a single-channel PNG as a SemanticMap or ClusterMap.

    16-bit values of 65535 always decode to VOID. For 8-bit files,
    ``treat_255_as_void`` additionally maps 255 to VOID (the usual
    "ignore" convention of 8-bit annotation PNGs).
    """
    if kind not in ("semantic", "cluster"):
        raise ValidationError(f"kind must be 'semantic' or 'cluster', got {kind!r}")
    with Image.open(path) as img:
        if img.format != "PNG":
            raise FormatError(f"{path}: expected a PNG file, got {img.format}")
        if img.mode not in _GRAYSCALE_MODES:
            raise FormatError(
                f"{path}: label maps must be single-channel grayscale, got mode {img.mode!r}"
            )
        arr = np.asarray(img)
    if arr.dtype == np.uint8:
        values = arr.astype(np.uint32)
        if treat_255_as_void:
            values[values == 255] = VOID
    else:
        values = arr.astype(np.int64)
        if np.any(values < 0) or np.any(values > VOID):
            raise FormatError(f"{path}: pixel values exceed 16-bit label range")
        values = values.astype(np.uint32)
    if kind == "cluster":
        return ClusterMap(values, n_classes)
    return SemanticMap(values, n_classes)


def write_label_map(m, path) -> None:
    """Write a SemanticMap or ClusterMap as a 16-bit grayscale PNG."""
    data = m.data
    if data.dtype != np.uint16:
        too_big = data[(data > VOID)]
        if too_big.size:
            raise ValidationError(
                f"cluster id {int(too_big[0])} does not fit 16-bit label storage"
            )
        data = data.astype(np.uint16)
    Image.fromarray(data).save(path, format="PNG")


def read_score_volume(path) -> ScoreVolume:
    """Read a GSV1 file; the float payload round-trips bit-exactly."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _GSV1_HEADER.size:
        raise FormatError(f"{path}: truncated GSV1 header")
    magic, channels, height, width, flags = _GSV1_HEADER.unpack_from(blob)
    if magic != GSV1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {GSV1_MAGIC!r}")
    if min(channels, height, width) < 1:
        raise FormatError(f"{path}: zero dimension in header ({channels}x{height}x{width})")
    count = channels * height * width
    if count > _MAX_ELEMENTS:
        raise FormatError(f"{path}: header dimensions overflow ({count} elements)")
    expected = _GSV1_HEADER.size + 4 * count
    if len(blob) < expected:
        raise FormatError(f"{path}: truncated payload ({len(blob)} < {expected} bytes)")
    if len(blob) > expected:
        raise FormatError(f"{path}: {len(blob) - expected} trailing bytes after payload")
    payload = np.frombuffer(blob, dtype="<f4", offset=_GSV1_HEADER.size)
    data = payload.reshape(channels, height, width)
    return ScoreVolume(data, softmax_normalized=bool(flags & _FLAG_SOFTMAX))


def write_score_volume(vol: ScoreVolume, path) -> None:
    flags = _FLAG_SOFTMAX if vol.softmax_normalized else 0
    header = _GSV1_HEADER.pack(GSV1_MAGIC, vol.channels, vol.height, vol.width, flags)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(vol.data, dtype="<f4").tobytes())


def read_anomaly_scores(path) -> np.ndarray:
    """Read a 1-channel GSV1 file as an HxW score grid."""
    vol = read_score_volume(path)
    if vol.channels != 1:
        raise FormatError(f"{path}: anomaly maps must have one channel, got {vol.channels}")
    return vol.data[0]


def write_anomaly_scores(scores: np.ndarray, path) -> None:
    arr = np.asarray(scores, dtype=np.float32)
    if arr.ndim != 2:
        raise ValidationError(f"anomaly scores must be HxW, got shape {arr.shape}")
    write_score_volume(ScoreVolume(arr[None, :, :]), path)


def read_run_config(path) -> RunConfig:
    """Parse a JSON run config; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return RunConfig.from_dict(raw)


@dataclass(frozen=True)
class PerClassRow:
    """Matching tallies for one known class (or the unknown pool)."""

    class_id: object  # 0..N-1, or the string "unknown"
    iou_sum: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricReport:
    """Evaluation results; None marks a metric that is undefined on this data."""

    gq_known: float | None = None
    gq_unknown: float | None = None
    gq: float | None = None
    gq_clu: float | None = None
    miou_clusters: float | None = None
    auroc: float | None = None
    aupr: float | None = None
    fpr_at_95_tpr: float | None = None
    per_class: tuple = ()

    def to_dict(self) -> dict:
        return {
            "gq_known": self.gq_known,
            "gq_unknown": self.gq_unknown,
            "gq": self.gq,
            "gq_clu": self.gq_clu,
            "miou_clusters": self.miou_clusters,
            "auroc": self.auroc,
            "aupr": self.aupr,
            "fpr_at_95_tpr": self.fpr_at_95_tpr,
            "per_class": [
                {"class": r.class_id, "iou_sum": r.iou_sum,
                 "tp": r.tp, "fp": r.fp, "fn": r.fn}
                for r in self.per_class
            ],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MetricReport":
        rows = tuple(
            PerClassRow(r["class"], r["iou_sum"], r["tp"], r["fp"], r["fn"])
            for r in raw.get("per_class", ())
        )
        return cls(
            gq_known=raw.get("gq_known"),
            gq_unknown=raw.get("gq_unknown"),
            gq=raw.get("gq"),
            gq_clu=raw.get("gq_clu"),
            miou_clusters=raw.get("miou_clusters"),
            auroc=raw.get("auroc"),
            aupr=raw.get("aupr"),
            fpr_at_95_tpr=raw.get("fpr_at_95_tpr"),
            per_class=rows,
        )


def report_json(report: MetricReport, extra: dict | None = None) -> str:
    """Serialize a report deterministically (stable key order, full precision)."""
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_metric_report(report: MetricReport, path, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(report_json(report, extra))


def read_metric_report(path) -> MetricReport:
    with open(path, "r", encoding="utf-8") as f:
        return MetricReport.from_dict(json.load(f))


def write_per_class_csv(report: MetricReport, path) -> None:
    """CSV export of the per-class matching tallies."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "tp", "fp", "fn", "iou_sum"])
        for r in report.per_class:
            writer.writerow([r.class_id, r.tp, r.fp, r.fn, repr(r.iou_sum)])
