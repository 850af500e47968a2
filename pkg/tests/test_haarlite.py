import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emotraj.errors import EmptyClass, OutOfBounds
from emotraj.haarlite import (
    FEATURE_KINDS,
    Detection,
    HaarFeature,
    StumpClassifier,
    adaboost_train,
    detect,
    enumerate_features,
    feature_matrix,
    feature_value,
    format_stump,
    integral_image,
    non_max_suppression,
    parse_stump,
    rect_sum,
    training_error,
)
from emotraj.imagecore import GrayImage, resize
from emotraj.pipeline import train_detector
from emotraj.synthgen import SynthConfig, synthesize

from oracles import brute_feature, brute_integral, brute_rect_sum

small_images = arrays(np.int64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 255))


# -- integral image --------------------------------------------------------------

def test_single_pixel_and_two_by_two():
    assert integral_image([[5]]).at(0, 0) == 5
    ii = integral_image([[1, 2], [3, 4]])
    np.testing.assert_array_equal(ii.table[1:, 1:], [[1, 3], [4, 10]])
    np.testing.assert_array_equal(ii.table[1:, 1:], brute_integral([[1, 2], [3, 4]]).astype(np.int64))
    assert not integral_image(np.zeros((16, 16))).table.any()


def test_rect_sum_examples():
    ii = integral_image([[1, 2], [3, 4]])
    assert rect_sum(ii, 0, 0, 2, 2) == 10
    assert rect_sum(ii, 1, 0, 0, 2) == 0
    assert rect_sum(ii, 1, 1, 1, 1) == 4
    with pytest.raises(OutOfBounds):
        rect_sum(ii, 1, 1, 2, 1)
    with pytest.raises(OutOfBounds):
        rect_sum(ii, -1, 0, 1, 1)


def test_integer_images_use_64_bit_accumulators():
    ii = integral_image(np.full((300, 300), 255))
    assert ii.table.dtype == np.int64
    assert ii.at(299, 299) == 255 * 300 * 300


@settings(max_examples=60, deadline=None)
@given(small_images, st.data())
def test_rect_sum_matches_brute_force(img, data):
    ii = integral_image(img)
    h, w = img.shape
    x = data.draw(st.integers(0, w))
    y = data.draw(st.integers(0, h))
    rw = data.draw(st.integers(0, w - x))
    rh = data.draw(st.integers(0, h - y))
    assert rect_sum(ii, x, y, rw, rh) == brute_rect_sum(img.tolist(), x, y, rw, rh)


@settings(max_examples=40, deadline=None)
@given(small_images, st.integers(0, 2**31))
def test_integral_image_is_linear(a, seed):
    b = np.random.default_rng(seed).integers(0, 256, a.shape)
    np.testing.assert_array_equal(integral_image(a + b).table, integral_image(a).table + integral_image(b).table)


# -- features --------------------------------------------------------------------

@pytest.mark.parametrize("kind", FEATURE_KINDS)
def test_feature_on_constant_image_is_zero(kind):
    ii = integral_image(np.full((24, 24), 137))
    for f in enumerate_features(12, step=3, kinds=(kind,)):
        for scale in (1.0, 1.5, 2.0):
            assert abs(feature_value(ii, f, (0, 0), scale)) <= 1e-9


def test_step_image_two_rect_feature():
    img = np.zeros((4, 8))
    img[:, 4:] = 255
    ii = integral_image(img)
    f = HaarFeature("two_h", 0, 0, 4, 4, 8)
    assert feature_value(ii, f) == 255 * 16
    assert feature_value(integral_image(img[:, ::-1]), f) == -255 * 16


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, (12, 12), elements=st.integers(0, 255)), st.sampled_from(FEATURE_KINDS),
       st.integers(0, 2**31))
def test_feature_value_matches_brute_force(img, kind, seed):
    rng = np.random.default_rng(seed)
    feats = enumerate_features(12, kinds=(kind,))
    f = feats[rng.integers(len(feats))]
    got = feature_value(integral_image(img), f)
    assert got == pytest.approx(brute_feature(img.tolist(), kind, f.x, f.y, f.w, f.h), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (16, 16), elements=st.floats(0, 200)), st.sampled_from(FEATURE_KINDS),
       st.floats(-50, 50), st.sampled_from([1.0, 1.25, 2.0]))
def test_feature_value_invariant_to_constant_offset(img, kind, c, scale):
    f = enumerate_features(8, step=2, kinds=(kind,))[-1]
    a = feature_value(integral_image(img), f, (0, 0), scale)
    b = feature_value(integral_image(img + c), f, (0, 0), scale)
    assert abs(a - b) <= 1e-6


def test_mirrored_feature_negates():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (8, 8))
    f = HaarFeature("two_v", 1, 1, 3, 3, 8)
    flipped = np.zeros_like(img)
    flipped[1:7] = img[1:7][::-1]
    assert feature_value(integral_image(flipped), f) == -feature_value(integral_image(img), f)


def test_feature_matrix_matches_feature_value(rng):
    windows = [rng.integers(0, 256, (10, 10)) for _ in range(5)]
    feats = enumerate_features(10, step=2)
    m = feature_matrix(windows, feats)
    for i, w in enumerate(windows):
        ii = integral_image(w)
        for j in range(0, len(feats), 17):
            assert m[i, j] == pytest.approx(feature_value(ii, feats[j]), abs=1e-9)


def test_feature_must_fit_window():
    with pytest.raises(OutOfBounds):
        HaarFeature("three_h", 0, 0, 3, 1, 8)
    with pytest.raises(ValueError):
        HaarFeature("five", 0, 0, 1, 1, 8)


# -- AdaBoost --------------------------------------------------------------------

def _bright_left(n, rng, bright_left):
    out = []
    for _ in range(n):
        w = rng.integers(0, 40, (6, 6))
        if bright_left:
            w[:, :3] += 200
        else:
            w[:, 3:] += 200
        out.append(w)
    return out


def test_separable_case_gives_one_stump():
    rng = np.random.default_rng(0)
    pos, neg = _bright_left(5, rng, True), _bright_left(5, rng, False)
    result = adaboost_train(pos, neg, rounds=10)
    assert len(result) == 1 and not result.degenerate
    assert result.errors == [0.0]
    assert training_error(result.stumps, pos, neg) == 0.0


def test_identical_classes_are_degenerate():
    rng = np.random.default_rng(1)
    windows = [rng.integers(0, 256, (6, 6)) for _ in range(4)]
    result = adaboost_train(windows, windows, rounds=5)
    assert result.stumps == [] and result.degenerate


def test_empty_class_rejected():
    with pytest.raises(EmptyClass):
        adaboost_train([], [np.zeros((4, 4))], rounds=1)


def _noisy_set(seed, n=10, side=6):
    rng = np.random.default_rng(seed)
    pos = [rng.integers(0, 256, (side, side)) for _ in range(n // 2)]
    neg = [rng.integers(0, 256, (side, side)) for _ in range(n - n // 2)]
    return pos, neg


def _exp_loss(stumps, pos, neg):
    feats = list(dict.fromkeys(s.feature for s in stumps))
    values = feature_matrix(list(pos) + list(neg), feats)
    labels = np.array([1] * len(pos) + [-1] * len(neg))
    margin = np.zeros(len(labels))
    for s in stumps:
        col = values[:, feats.index(s.feature)]
        margin += s.alpha * np.where(s.polarity * (col - s.threshold) > 0, 1, -1)
    return float(np.mean(np.exp(-labels * margin)))


@pytest.mark.parametrize("seed", range(8))
def test_exponential_loss_decreases_each_round(seed):
    pos, neg = _noisy_set(seed, n=12, side=5)
    stumps = adaboost_train(pos, neg, rounds=6, feature_step=2).stumps
    losses = [1.0] + [_exp_loss(stumps[:t], pos, neg) for t in range(1, len(stumps) + 1)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    for t in range(1, len(stumps) + 1):
        assert training_error(stumps[:t], pos, neg) <= losses[t] + 1e-12


def test_zero_one_training_error_can_rise():
    # the 0/1 training error of the vote is not monotone in T; only the
    # exponential loss above is guaranteed to fall
    rises = 0
    for seed in range(30):
        pos, neg = _noisy_set(seed, n=12, side=5)
        stumps = adaboost_train(pos, neg, rounds=6, feature_step=2).stumps
        errs = [training_error(stumps[:t], pos, neg) for t in range(1, len(stumps) + 1)]
        rises += any(b > a for a, b in zip(errs, errs[1:]))
    assert rises > 0


def test_stump_threshold_is_midpoint_and_weights_renormalize():
    pos, neg = _noisy_set(11)
    result = adaboost_train(pos, neg, rounds=3, feature_step=2)
    for w in result.weights:
        assert math.isclose(sum(w), 1.0, abs_tol=1e-12)
    feats = enumerate_features(6, step=2)
    values = feature_matrix(pos + neg, feats)
    for s in result.stumps:
        col = np.unique(values[:, feats.index(s.feature)])
        mids = (col[1:] + col[:-1]) / 2
        assert np.min(np.abs(mids - s.threshold)) == 0.0


# -- detection -------------------------------------------------------------------

@pytest.fixture(scope="module")
def face_detector():
    sf = synthesize(SynthConfig(seed=3, sequences_per_emotion=2, width=32, height=32, noise_sigma=1.0))
    faces = [GrayImage(fr[0]) for *_, fr in sf.sequences] + [GrayImage(fr[-1]) for *_, fr in sf.sequences]
    boost = train_detector(faces, window=16, rounds=10, seed=0)
    return boost.stumps, resize(faces[0], 16, 16).pixels


def test_planted_positive_gives_one_box(face_detector):
    stumps, patch = face_detector
    img = np.zeros((48, 48))
    img[20:36, 12:28] = patch
    hits = detect(GrayImage(img), stumps, 16, stride=1, scales=[1.0])
    assert [(d.x, d.y, d.size) for d in hits] == [(12, 20, 16)]


def test_all_zero_image_gives_nothing(face_detector):
    stumps, _ = face_detector
    assert detect(GrayImage(np.zeros((48, 48))), stumps, 16, stride=1, scales=[1.0, 2.0]) == []


def test_image_smaller_than_window(face_detector):
    stumps, _ = face_detector
    assert detect(GrayImage(np.full((10, 10), 128.0)), stumps, 16) == []


def test_detect_rejects_empty_ensemble():
    with pytest.raises(ValueError):
        detect(GrayImage(np.zeros((8, 8))), [], 4)


def test_non_max_suppression_keeps_best():
    a = Detection(0, 0, 10, 0.9)
    b = Detection(1, 1, 10, 0.95)
    c = Detection(30, 30, 10, 0.5)
    assert non_max_suppression([a, b, c]) == [b, c]
    assert a.iou(a) == 1.0 and a.iou(c) == 0.0


def test_stump_line_round_trip():
    s = StumpClassifier(HaarFeature("three_v", 1, 2, 3, 1, 8), 0.1 + 0.2, -1, 1 / 3)
    line = format_stump(s)
    assert line.startswith("stump three_v 1 2 3 1 8 ")
    assert parse_stump(line) == s
    with pytest.raises(ValueError):
        parse_stump("stump two_h 0 0 1 1 4 0.5 0 1.0")
