import numpy as np
import pytest

from gosskit import (
    AnomalyMap,
    IdentifyMethod,
    ScoreVolume,
    ValidationError,
    adjust_confidence,
    anomaly_map,
    external_anomaly_identify,
    maxlogit_identify,
    msp_identify,
    nplus1_identify,
)

from synth import random_logit_volume, random_softmax_volume


def pixel_volume(*channel_values, softmax=True):
    data = np.array(channel_values, dtype=np.float32).reshape(-1, 1, 1)
    return ScoreVolume(data, softmax_normalized=softmax)


def test_msp_confident_pixel_keeps_argmax():
    out = msp_identify(pixel_volume(0.7, 0.2, 0.1), tau=0.5)
    assert out.data[0, 0] == 0
    assert out.n_classes == 3


def test_msp_low_confidence_goes_unknown():
    out = msp_identify(pixel_volume(0.4, 0.35, 0.25), tau=0.5)
    assert out.data[0, 0] == 3


def test_msp_zero_threshold_is_plain_argmax():
    rng = np.random.default_rng(2)
    vol = random_softmax_volume(rng, 4, 6, 6)
    out = msp_identify(vol, tau=0.0)
    assert np.array_equal(out.data, np.argmax(vol.data, axis=0))


def test_msp_requires_softmax_volume():
    with pytest.raises(ValidationError):
        msp_identify(pixel_volume(3.0, 1.0, softmax=False), tau=0.5)


def test_msp_ignores_non_max_channels():
    a = msp_identify(pixel_volume(0.6, 0.3, 0.1), tau=0.5)
    b = msp_identify(pixel_volume(0.6, 0.1, 0.3), tau=0.5)
    assert a.data[0, 0] == b.data[0, 0] == 0


def test_argmax_tie_breaks_to_lowest_channel():
    out = msp_identify(pixel_volume(0.5, 0.5), tau=0.4)
    assert out.data[0, 0] == 0


def test_maxlogit_examples():
    keep = maxlogit_identify(pixel_volume(5.0, 1.0, softmax=False), tau=-2.0)
    assert keep.data[0, 0] == 0
    flag = maxlogit_identify(pixel_volume(0.1, 0.2, softmax=False), tau=-1.0)
    assert flag.data[0, 0] == 2


def test_adjust_confidence_scales_last_channel_only():
    out = adjust_confidence(pixel_volume(0.5, 0.3, 0.2), beta_uk=5.0)
    assert out.data[:, 0, 0].tolist() == pytest.approx([0.5, 0.3, 1.0])
    assert not out.softmax_normalized


def test_adjust_confidence_near_one_is_nearly_identity():
    vol = pixel_volume(0.5, 0.3, 0.2)
    out = adjust_confidence(vol, beta_uk=1.0 + 1e-7)
    assert np.allclose(out.data, vol.data, atol=1e-6)


def test_adjust_confidence_rejects_beta_at_most_one():
    with pytest.raises(ValidationError):
        adjust_confidence(pixel_volume(0.5, 0.5), beta_uk=1.0)


def test_adjustment_matches_renormalized_argmax():
    rng = np.random.default_rng(9)
    vol = random_softmax_volume(rng, 5, 8, 8)
    adjusted = adjust_confidence(vol, beta_uk=4.0)
    renorm = adjusted.data / adjusted.data.sum(axis=0, keepdims=True)
    assert np.array_equal(np.argmax(adjusted.data, axis=0), np.argmax(renorm, axis=0))


def test_nplus1_plain_argmax():
    out = nplus1_identify(pixel_volume(0.5, 0.3, 0.2))
    assert out.data[0, 0] == 0
    assert out.n_classes == 2


def test_nplus1_with_adjustment_flips_to_unknown():
    out = nplus1_identify(pixel_volume(0.5, 0.3, 0.2), beta_uk=5.0)
    assert out.data[0, 0] == 2  # 5 * 0.2 = 1.0 beats 0.5


def test_identified_maps_never_contain_void():
    rng = np.random.default_rng(4)
    for _ in range(10):
        vol = random_softmax_volume(rng, 4, 7, 7)
        for out in (
            msp_identify(vol, 0.5),
            maxlogit_identify(random_logit_volume(rng, 4, 7, 7), 0.0),
            nplus1_identify(vol, 3.0),
        ):
            assert out.data.max() <= out.n_classes


def test_msp_threshold_monotonicity():
    rng = np.random.default_rng(6)
    vol = random_softmax_volume(rng, 4, 10, 10)
    previous = None
    for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
        unknown = msp_identify(vol, tau).data == 4
        if previous is not None:
            assert (previous <= unknown).all()
        previous = unknown


def test_maxlogit_raising_tau_never_shrinks_known_set():
    rng = np.random.default_rng(8)
    vol = random_logit_volume(rng, 4, 10, 10)
    previous = None
    for tau in (-6.0, -3.0, 0.0, 3.0):
        known = maxlogit_identify(vol, tau).data < 4
        if previous is not None:
            assert (previous <= known).all()
        previous = known


def test_nplus1_beta_monotonicity():
    rng = np.random.default_rng(10)
    vol = random_softmax_volume(rng, 5, 10, 10)
    previous = None
    for beta in (1.5, 2.5, 5.0, 20.0):
        unknown = nplus1_identify(vol, beta).data == 4
        if previous is not None:
            assert (previous <= unknown).all()
        previous = unknown


def test_anomaly_map_values():
    assert anomaly_map(pixel_volume(1.0, 0.0), IdentifyMethod("msp", tau=0.5)).score[0, 0] == 0.0
    got = anomaly_map(pixel_volume(3.0, -1.0, softmax=False), IdentifyMethod("maxlogit", tau=0.0))
    assert got.score[0, 0] == -3.0
    adjusted = anomaly_map(pixel_volume(0.5, 0.3, 0.2),
                           IdentifyMethod("nplus1_adjusted", beta_uk=5.0))
    assert adjusted.score[0, 0] == pytest.approx(1.0)


def test_external_identification_thresholds_precomputed_scores():
    vol = pixel_volume(0.2, 0.8, softmax=False)
    low = external_anomaly_identify(vol, AnomalyMap(np.array([[0.1]])), tau=0.5)
    high = external_anomaly_identify(vol, AnomalyMap(np.array([[0.9]])), tau=0.5)
    assert low.data[0, 0] == 1
    assert high.data[0, 0] == 2


def test_anomaly_map_rejects_non_finite():
    with pytest.raises(ValidationError):
        AnomalyMap(np.array([[np.nan]]))


def test_method_parameter_validation():
    with pytest.raises(ValidationError):
        IdentifyMethod("msp")
    with pytest.raises(ValidationError):
        IdentifyMethod("msp", tau=0.0)  # config-level msp threshold is open-interval
    with pytest.raises(ValidationError):
        IdentifyMethod("nplus1_adjusted", beta_uk=0.5)
    with pytest.raises(ValidationError):
        IdentifyMethod("sigmoid", tau=0.5)
    IdentifyMethod("maxlogit", tau=-3.0)
