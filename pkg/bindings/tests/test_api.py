import numpy as np
import pytest

from gosskit import VOID, ValidationError
from gosskit_arrays import evaluate_arrays, identify_arrays, make_config


def test_identity_arrays_score_one():
    cls = np.zeros((6, 6), dtype=np.uint16)
    cls[2:4, 2:4] = 3  # unknown region, N=3
    clu = np.full((6, 6), VOID, dtype=np.uint32)
    clu[2:4, 2:4] = 0
    report = evaluate_arrays(cls, clu, cls, clu, make_config(n_classes=3))
    assert report["gq"] == 1.0
    assert report["gq_known"] == 1.0
    assert report["gq_unknown"] == 1.0


def test_straddling_toy_arrays():
    n = 5
    gt_cls = np.zeros((4, 4), dtype=np.uint16)
    gt_clu = np.full((4, 4), VOID, dtype=np.uint32)
    gt_cls[0:2, 0:2] = n
    gt_clu[0:2, 0:2] = 0
    gt_cls[2:4, 0:2] = n
    gt_clu[2:4, 0:2] = 1

    pr_cls = np.zeros((4, 4), dtype=np.uint16)
    pr_clu = np.full((4, 4), VOID, dtype=np.uint32)
    pr_cls[1:3, 0:2] = n
    pr_clu[1:3, 0:2] = 0

    report = evaluate_arrays(pr_cls, pr_clu, gt_cls, gt_clu, make_config(n_classes=n))
    assert report["gq_unknown"] == 0.0
    unknown = [r for r in report["per_class"] if r["class"] == "unknown"][0]
    assert (unknown["tp"], unknown["fp"], unknown["fn"]) == (0, 1, 2)


def test_shape_mismatch_rejected():
    cfg = make_config(n_classes=2)
    a = np.zeros((4, 4), dtype=np.uint16)
    b = np.zeros((4, 5), dtype=np.uint16)
    v = np.full((4, 4), VOID, dtype=np.uint32)
    with pytest.raises(ValidationError):
        evaluate_arrays(a, v, b, v, cfg)


def test_identify_arrays_msp():
    probs = np.array([[[0.7, 0.4]], [[0.3, 0.6]]], dtype=np.float32)
    out = identify_arrays(probs, "msp", tau=0.5)
    assert out.tolist() == [[0, 1]]
    low = identify_arrays(np.array([[[0.45]], [[0.55]]], dtype=np.float32) * np.float32(1.0),
                          "msp", tau=0.6)
    assert low.tolist() == [[2]]  # below tau -> unknown


def test_identify_arrays_adjusted_nplus1():
    probs = np.array([[[0.5]], [[0.3]], [[0.2]]], dtype=np.float32)
    plain = identify_arrays(probs, "nplus1")
    boosted = identify_arrays(probs, "nplus1_adjusted", beta_uk=5.0)
    assert plain[0, 0] == 0
    assert boosted[0, 0] == 2


def test_make_config_validates():
    with pytest.raises(ValidationError):
        make_config(n_classes=2, lambda_=1.5)
    with pytest.raises(TypeError):
        make_config(n_classes=2, nonsense=1)
