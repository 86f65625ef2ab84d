"""
The batch pipeline on files
===========================

The same pipeline, driven through the command line against directories of
PNG label maps and GSV1 score volumes. This script fabricates a miniature
dataset in a temporary directory and runs:

    convert -> identify -> fuse -> eval -> roc
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from gosskit import ScoreVolume, write_score_volume


def run(*args):
    cmd = [sys.executable, "-m", "gosskit", *args]
    print("$ gosskit " + " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    if out.stdout.strip():
        print(out.stdout.strip())
    return out.stdout


root = Path(tempfile.mkdtemp(prefix="gosskit-demo-"))
rng = np.random.default_rng(11)
N = 2  # two known classes after the split below

# --- a miniature annotated dataset (original ids 10, 20 known; 40 unknown)
annotations = root / "annotations"
annotations.mkdir()
for i in range(4):
    grid = np.full((16, 16), 10, dtype=np.uint16)
    grid[4:9, 4:9] = 20
    if i % 2 == 0:  # half the images contain an unknown object
        grid[10:14, 2 + i : 7 + i] = 40
    Image.fromarray(grid).save(annotations / f"img{i}.png")

split = root / "split.json"
split.write_text(json.dumps({"name": "demo", "known": [10, 20], "unknown": [40]}))

run("convert", str(annotations), "--split", str(split), "--mode", "test",
    "--out-dir", str(root / "gt"))

# --- fake score volumes for the admitted images: nearly-perfect softmax
scores_dir = root / "scores"
scores_dir.mkdir()
for gt_png in sorted((root / "gt").glob("*.class.png")):
    stem = gt_png.name[: -len(".class.png")]
    labels = np.asarray(Image.open(gt_png)).astype(np.int64)
    probs = np.full((N, 16, 16), 0.05, dtype=np.float32)
    for k in range(N):
        probs[k][labels == k] = 0.95
    probs /= probs.sum(axis=0, keepdims=True)
    write_score_volume(ScoreVolume(probs, softmax_normalized=True),
                       scores_dir / f"{stem}.gsv")

run("identify", str(scores_dir), "--method", "msp", "--out-dir", str(root / "ident"))

# --- a whole-image clustering (here: the ground-truth clusters, padded)
clusters_dir = root / "clusters"
clusters_dir.mkdir()
for gt_png in sorted((root / "gt").glob("*.cluster.png")):
    arr = np.asarray(Image.open(gt_png)).copy()
    arr[arr == 65535] = 9  # cover known pixels with one background cluster
    Image.fromarray(arr).save(clusters_dir / gt_png.name)

run("fuse", "--side-dir", str(root / "ident"), "--clusters-dir", str(clusters_dir),
    "--classes", str(N), "--out-dir", str(root / "pred"))

report = run("eval", str(root / "pred"), str(root / "gt"), "--classes", str(N),
             "--clusters-dir", str(clusters_dir))
print("GQ =", json.loads(report)["gq"])

run("roc", str(root / "ident"), str(root / "gt"), "--classes", str(N))
print("\nartifacts left in", root)
