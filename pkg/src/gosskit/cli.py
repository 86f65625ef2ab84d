"""Command-line pipeline driver.

Subcommands cover the whole batch workflow: ``convert`` builds benchmark
ground truth from ordinary annotations, ``identify`` turns score volumes into
identified class maps and anomaly maps, ``fuse`` merges identification with
clustering, ``eval`` scores predictions against ground truth, and ``roc``
computes threshold-free ranking metrics.

File conventions (pairing is by stem across directories):
    <stem>.class.png     semantic map (16-bit grayscale)
    <stem>.cluster.png   cluster map (16-bit grayscale)
    <stem>.gsv           score volume (GSV1)
    <stem>.anomaly.gsv   anomaly scores (1-channel GSV1)

Progress and warnings go to stderr; machine-readable JSON goes to files or
stdout. Exit codes: 0 success, 1 validation error, 2 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import benchgen, metrics, tensorio
from .config import RunConfig
from .core import VOID, ClusterMap, FormatError, GossMap, ValidationError
from .fuse import fuse as fuse_maps, mask_clusters, split_clusters
from .identify import (
    AnomalyMap,
    IdentifyMethod,
    anomaly_map,
    external_anomaly_identify,
    identify as identify_pixels,
)
from .matching import MatchAccumulator, match_goss

_ALL_IDS = VOID - 1  # permissive class count for original-id annotations


def _stems(directory: Path, suffix: str) -> list:
    if not directory.is_dir():
        raise FormatError(f"not a directory: {directory}")
    return sorted(p.name[: -len(suffix)] for p in directory.glob(f"*{suffix}"))


def _pair_stems(a_dir: Path, a_suffix: str, b_dir: Path, b_suffix: str) -> list:
    a = _stems(a_dir, a_suffix)
    b = set(_stems(b_dir, b_suffix))
    missing = [s for s in a if s not in b]
    extra = sorted(b - set(a))
    if missing or extra:
        raise ValidationError(
            "directories are not aligned; "
            f"missing from {b_dir}: {missing or 'none'}, unmatched in {b_dir}: {extra or 'none'}"
        )
    if not a:
        raise ValidationError(f"no *{a_suffix} files in {a_dir}")
    return a


def _load_config(args) -> RunConfig:
    cfg = tensorio.read_run_config(args.config) if args.config else RunConfig()
    overrides = {}
    for flag, attr in (
        ("tau", "tau"),
        ("beta_uk", "beta_uk"),
        ("lambda_", "lambda_"),
        ("connectivity", "connectivity"),
        ("min_segment_area", "min_segment_area"),
        ("method", "method"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[attr] = value
    for flag in ("strict_n", "fallback_gq", "split_masked_clusters"):
        if getattr(args, flag, False):
            overrides[flag] = True
    return cfg.replace(**overrides) if overrides else cfg


def _build_method(cfg: RunConfig) -> IdentifyMethod:
    if cfg.method == "maxlogit" and not cfg.was_set("tau"):
        raise ValidationError(
            "maxlogit thresholds raw logits; pass an explicit --tau (the 0.5 "
            "default only makes sense on the probability scale)"
        )
    if cfg.method in ("msp", "maxlogit", "external"):
        return IdentifyMethod(cfg.method, tau=cfg.tau)
    if cfg.method == "nplus1_adjusted":
        return IdentifyMethod(cfg.method, beta_uk=cfg.beta_uk)
    return IdentifyMethod(cfg.method)


def _read_goss(directory: Path, stem: str, n_classes: int) -> GossMap:
    cls = tensorio.read_label_map(directory / f"{stem}.class.png", n_classes, "semantic")
    clu = tensorio.read_label_map(directory / f"{stem}.cluster.png", n_classes, "cluster")
    return GossMap(cls.data, clu.data, n_classes)


# ---------------------------------------------------------------- convert

def _convert_one(task) -> dict:
    stem, gt_path, split, policy, cfg, out_dir, void255 = task
    try:
        gt = tensorio.read_label_map(gt_path, _ALL_IDS, "semantic", treat_255_as_void=void255)
        if not benchgen.admit_image(gt, split, policy):
            return {"stem": stem, "admitted": False}
        out_dir = Path(out_dir)
        if policy.mode == "test":
            goss = benchgen.build_goss_gt(gt, split, cfg.connectivity, cfg.min_segment_area)
            tensorio.write_label_map(goss.semantic(), out_dir / f"{stem}.class.png")
            tensorio.write_label_map(goss.clusters(), out_dir / f"{stem}.cluster.png")
        else:
            semantic = benchgen.remap_semantic(gt, split, policy)
            clusters = np.full(semantic.shape, VOID, dtype=np.uint32)
            tensorio.write_label_map(semantic, out_dir / f"{stem}.class.png")
            tensorio.write_label_map(
                ClusterMap(clusters, split.n_classes), out_dir / f"{stem}.cluster.png"
            )
        return {"stem": stem, "admitted": True}
    except ValidationError as exc:
        return {"stem": stem, "error": str(exc), "code": 1}
    except (FormatError, OSError) as exc:
        return {"stem": stem, "error": str(exc), "code": 2}


def _cmd_convert(args) -> int:
    cfg = _load_config(args)
    split_arg = args.split
    if Path(split_arg).exists():
        split = benchgen.load_class_split(split_arg)
    else:
        split = benchgen.bundled_split(split_arg)
    policy = benchgen.SplitPolicy(mode=args.mode, dataset_style=args.style)
    gt_dir = Path(args.gt_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = _stems(gt_dir, ".png")
    if not stems:
        raise ValidationError(f"no *.png files in {gt_dir}")
    tasks = [
        (stem, gt_dir / f"{stem}.png", split, policy, cfg, str(out_dir), args.void_255)
        for stem in stems
    ]
    results = _run_tasks(_convert_one, tasks, cfg.workers)
    failed = sorted((r for r in results if "error" in r), key=lambda r: r["stem"])
    for r in failed:
        print(f"error: {r['stem']}: {r['error']}", file=sys.stderr)
    admitted = sorted(r["stem"] for r in results if r.get("admitted"))
    rejected = sorted(r["stem"] for r in results if "error" not in r and not r["admitted"])
    (out_dir / "admitted.txt").write_text("".join(s + "\n" for s in admitted), "utf-8")
    (out_dir / "rejected.txt").write_text("".join(s + "\n" for s in rejected), "utf-8")
    print(json.dumps({"admitted": len(admitted), "failed": len(failed),
                      "rejected": len(rejected)}, sort_keys=True))
    print(f"convert: {len(admitted)} admitted, {len(rejected)} rejected, "
          f"{len(failed)} failed", file=sys.stderr)
    if failed:
        return max(r["code"] for r in failed)
    return 0


# ---------------------------------------------------------------- identify

def _identify_one(task) -> dict:
    stem, vol_path, method, out_dir, anomaly_dir = task
    try:
        vol = tensorio.read_score_volume(vol_path)
        out_dir = Path(out_dir)
        if method.kind == "external":
            scores = tensorio.read_anomaly_scores(Path(anomaly_dir) / f"{stem}.anomaly.gsv")
            anomaly = AnomalyMap(scores)
            side = external_anomaly_identify(vol, anomaly, method.tau)
        else:
            anomaly = anomaly_map(vol, method)
            side = identify_pixels(vol, method)
        tensorio.write_label_map(side, out_dir / f"{stem}.class.png")
        tensorio.write_anomaly_scores(anomaly.score, out_dir / f"{stem}.anomaly.gsv")
        return {"stem": stem}
    except ValidationError as exc:
        return {"stem": stem, "error": str(exc), "code": 1}
    except (FormatError, OSError) as exc:
        return {"stem": stem, "error": str(exc), "code": 2}


def _cmd_identify(args) -> int:
    cfg = _load_config(args)
    method = _build_method(cfg)
    if method.kind == "external" and not args.anomaly_dir:
        raise ValidationError("external identification needs --anomaly-dir")
    scores_dir = Path(args.scores_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = _stems(scores_dir, ".gsv")
    stems = [s for s in stems if not s.endswith(".anomaly")]
    if not stems:
        raise ValidationError(f"no *.gsv files in {scores_dir}")
    tasks = [
        (stem, scores_dir / f"{stem}.gsv", method, str(out_dir), args.anomaly_dir)
        for stem in stems
    ]
    results = _run_tasks(_identify_one, tasks, cfg.workers)
    failed = sorted((r for r in results if "error" in r), key=lambda r: r["stem"])
    for r in failed:
        print(f"error: {r['stem']}: {r['error']}", file=sys.stderr)
    print(f"identify: {len(stems) - len(failed)} volumes processed, "
          f"{len(failed)} failed", file=sys.stderr)
    if failed:
        return max(r["code"] for r in failed)
    return 0


# ---------------------------------------------------------------- fuse

def _fuse_one(task) -> None:
    stem, side_dir, clusters_dir, n, cfg, fallback, out_dir = task
    side = tensorio.read_label_map(Path(side_dir) / f"{stem}.class.png", n, "semantic")
    clusters = tensorio.read_label_map(Path(clusters_dir) / f"{stem}.cluster.png", n, "cluster")
    masked = mask_clusters(clusters, side)
    if cfg.split_masked_clusters:
        masked = split_clusters(masked, cfg.connectivity)
    goss = fuse_maps(side, masked, fallback_singletons=fallback,
                     connectivity=cfg.connectivity)
    out = Path(out_dir)
    tensorio.write_label_map(goss.semantic(), out / f"{stem}.class.png")
    tensorio.write_label_map(goss.clusters(), out / f"{stem}.cluster.png")


def _cmd_fuse(args) -> int:
    cfg = _load_config(args)
    side_dir = Path(args.side_dir)
    clusters_dir = Path(args.clusters_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = _pair_stems(side_dir, ".class.png", clusters_dir, ".cluster.png")
    tasks = [
        (stem, str(side_dir), str(clusters_dir), args.classes, cfg,
         args.fallback_singletons, str(out_dir))
        for stem in stems
    ]
    _run_tasks(_fuse_one, tasks, cfg.workers)
    print(f"fuse: {len(stems)} images fused", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- eval

def _eval_one(task):
    stem, pred_dir, gt_dir, clusters_dir, anomaly_dir, n, cfg = task
    pred = _read_goss(Path(pred_dir), stem, n)
    gt = _read_goss(Path(gt_dir), stem, n)
    acc = match_goss(pred, gt)
    gs_acc = None
    if clusters_dir is not None:
        clusters = tensorio.read_label_map(
            Path(clusters_dir) / f"{stem}.cluster.png", n, "cluster"
        )
        gs_acc = metrics.match_class_agnostic(clusters, gt, cfg.connectivity)
    samples = None
    if anomaly_dir is not None:
        scores = tensorio.read_anomaly_scores(Path(anomaly_dir) / f"{stem}.anomaly.gsv")
        if scores.shape != gt.shape:
            raise ValidationError(f"{stem}: anomaly map shape {scores.shape} != gt {gt.shape}")
        keep = gt.class_map != VOID
        samples = (scores[keep].astype(np.float64), gt.class_map[keep] == n)
    return stem, acc, gs_acc, samples


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    n = args.classes
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    stems = _pair_stems(gt_dir, ".class.png", pred_dir, ".class.png")
    if args.clusters_dir:
        _pair_stems(gt_dir, ".class.png", Path(args.clusters_dir), ".cluster.png")
    if args.anomaly_dir:
        _pair_stems(gt_dir, ".class.png", Path(args.anomaly_dir), ".anomaly.gsv")
    tasks = [
        (stem, str(pred_dir), str(gt_dir), args.clusters_dir, args.anomaly_dir, n, cfg)
        for stem in stems
    ]
    results = _run_tasks(_eval_one, tasks, cfg.workers)
    results.sort(key=lambda r: r[0])

    total = MatchAccumulator.empty(n)
    gs_total = MatchAccumulator.empty(n) if args.clusters_dir else None
    score_parts, label_parts = [], []
    per_image = {}
    for stem, acc, gs_acc, samples in results:
        total = total.merge(acc)
        if gs_acc is not None:
            gs_total = gs_total.merge(gs_acc)
        if samples is not None:
            score_parts.append(samples[0])
            label_parts.append(samples[1])
        if args.per_image:
            per_image[stem] = metrics.build_report(
                acc, cfg.lambda_, cfg.strict_n, cfg.fallback_gq, gs_acc
            ).to_dict()

    ranking = None
    if args.anomaly_dir:
        scores = np.concatenate(score_parts)
        labels = np.concatenate(label_parts)
        ranking = (
            metrics.auroc(scores, labels),
            metrics.aupr(scores, labels),
            metrics.fpr_at_95_tpr(scores, labels),
        )
    report = metrics.build_report(
        total, cfg.lambda_, cfg.strict_n, cfg.fallback_gq, gs_total, ranking
    )
    extra = {"images": len(stems)}
    if args.per_image:
        extra["per_image"] = per_image
    text = tensorio.report_json(report, extra)
    if args.report:
        Path(args.report).write_text(text, "utf-8")
        csv_path = args.csv or str(Path(args.report).with_suffix(".csv"))
    else:
        sys.stdout.write(text)
        csv_path = args.csv
    if csv_path:
        tensorio.write_per_class_csv(report, csv_path)
    _print_summary(report)
    return 0


def _print_summary(report) -> None:
    def pct(x):
        return "undefined" if x is None else f"{100.0 * x:.2f}"

    print(
        f"GQ {pct(report.gq)}  GQ-known {pct(report.gq_known)}  "
        f"GQ-unknown {pct(report.gq_unknown)}  GQ-clu {pct(report.gq_clu)}  "
        f"mIoU-clusters {pct(report.miou_clusters)}",
        file=sys.stderr,
    )


# ---------------------------------------------------------------- roc

def _roc_one(task):
    stem, anomaly_dir, gt_dir, n = task
    scores = tensorio.read_anomaly_scores(Path(anomaly_dir) / f"{stem}.anomaly.gsv")
    gt = tensorio.read_label_map(Path(gt_dir) / f"{stem}.class.png", n, "semantic")
    if scores.shape != gt.shape:
        raise ValidationError(f"{stem}: anomaly map shape {scores.shape} != gt {gt.shape}")
    keep = gt.data != VOID
    return stem, scores[keep].astype(np.float64), gt.data[keep] == n


def _cmd_roc(args) -> int:
    cfg = _load_config(args)
    n = args.classes
    gt_dir = Path(args.gt_dir)
    anomaly_dir = Path(args.anomaly_dir)
    stems = _pair_stems(gt_dir, ".class.png", anomaly_dir, ".anomaly.gsv")
    tasks = [(stem, str(anomaly_dir), str(gt_dir), n) for stem in stems]
    results = _run_tasks(_roc_one, tasks, cfg.workers)
    results.sort(key=lambda r: r[0])
    scores = np.concatenate([r[1] for r in results])
    labels = np.concatenate([r[2] for r in results])
    doc = {
        "auroc": metrics.auroc(scores, labels),
        "aupr": metrics.aupr(scores, labels),
        "fpr_at_95_tpr": metrics.fpr_at_95_tpr(scores, labels),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- plumbing

def _run_tasks(fn, tasks, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run-config file")
    p.add_argument("--workers", type=int, default=None, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gosskit",
        description="Open-set segmentation benchmark construction and GQ evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="build benchmark ground truth from annotations")
    p.add_argument("gt_dir", help="directory of original annotation PNGs")
    p.add_argument("--split", required=True, help="split JSON file or bundled split name")
    p.add_argument("--mode", choices=("train", "test"), default="test")
    p.add_argument("--style", choices=("filter", "keep-all"), default="filter")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--min-segment-area", type=int, default=None)
    p.add_argument("--void-255", action="store_true",
                   help="treat value 255 in 8-bit annotations as void")
    _add_common(p)
    p.set_defaults(run=_cmd_convert)

    p = sub.add_parser("identify", help="identify known/unknown pixels from score volumes")
    p.add_argument("scores_dir", help="directory of *.gsv score volumes")
    p.add_argument("--method", choices=("msp", "maxlogit", "nplus1", "nplus1_adjusted", "external"),
                   default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--beta-uk", type=float, dest="beta_uk", default=None)
    p.add_argument("--anomaly-dir", default=None,
                   help="precomputed *.anomaly.gsv maps (external method)")
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(run=_cmd_identify)

    p = sub.add_parser("fuse", help="fuse identified class maps with cluster maps")
    p.add_argument("--side-dir", required=True, help="identified *.class.png maps")
    p.add_argument("--clusters-dir", required=True, help="cluster *.cluster.png maps")
    p.add_argument("--classes", type=int, required=True, help="known class count N")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fallback-singletons", action="store_true",
                   help="give uncovered unknown components fresh singleton clusters")
    p.add_argument("--split-masked-clusters", action="store_true")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    _add_common(p)
    p.set_defaults(run=_cmd_fuse)

    p = sub.add_parser("eval", help="score fused predictions against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--classes", type=int, required=True, help="known class count N")
    p.add_argument("--lambda", type=float, dest="lambda_", default=None)
    p.add_argument("--strict-n", action="store_true", dest="strict_n")
    p.add_argument("--fallback-gq", action="store_true", dest="fallback_gq")
    p.add_argument("--clusters-dir", default=None,
                   help="pre-fusion cluster maps for clustering-only metrics")
    p.add_argument("--anomaly-dir", default=None,
                   help="anomaly maps for ranking metrics")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--report", default=None, help="write report JSON here (default stdout)")
    p.add_argument("--csv", default=None, help="write per-class CSV here")
    p.add_argument("--per-image", action="store_true")
    _add_common(p)
    p.set_defaults(run=_cmd_eval)

    p = sub.add_parser("roc", help="ranking metrics from anomaly maps")
    p.add_argument("anomaly_dir")
    p.add_argument("gt_dir")
    p.add_argument("--classes", type=int, required=True, help="known class count N")
    p.add_argument("--report", default=None)
    _add_common(p)
    p.set_defaults(run=_cmd_roc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
