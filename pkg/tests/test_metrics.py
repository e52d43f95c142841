import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    categorical_ref,
    chamfer_ref,
    continuous_ref,
    material_ref,
    percentage_ref,
    voxel_iou_ref,
)
from tagphys.errors import EmptyCloud, LengthMismatch, UnknownLabel, ZeroCount, ZeroProbability, ZeroRange
from tagphys.metrics import (
    categorical_scores,
    chamfer,
    continuous_error,
    geometry_sequence_scores,
    inverse_frequency_weights,
    material_set_score,
    percentage_error,
    voxel_iou,
    weighted_cross_entropy,
)
from tagphys.tagparse import parse_composition

QUAD = (np.array([[0, 0, 0], [100, 0, 0], [100, 100, 0], [0, 100, 0]], float), np.array([[0, 1, 2], [0, 2, 3]]))


def test_material_examples():
    s = material_set_score([{"Cotton"}], [{"Cotton"}])
    assert (s.accuracy, s.f1) == (1.0, 1.0)
    s = material_set_score([{"Cotton"}], [{"Cotton", "Elastane"}])
    assert s.accuracy == 0.5 and s.f1 == pytest.approx(2 / 3, abs=1e-15)
    s = material_set_score([{"Cotton"}], [{"Polyester"}])
    assert (s.accuracy, s.f1) == (0.0, 0.0)
    comp = parse_composition("95% Polyester, 5% Elastane")
    assert material_set_score([comp], [comp]).accuracy == 1.0


def test_percentage_examples():
    assert percentage_error([{"Cotton": 80, "Elastane": 20}], [{"Cotton": 80, "Elastane": 20}]) .mae == 0
    s = percentage_error([{"Cotton": 80, "Elastane": 20}], [{"Cotton": 60, "Elastane": 40}])
    assert (s.mae, s.nmae) == (20.0, 0.375)
    s = percentage_error([{"Cotton": 100}], [{"Polyester": 100}])
    assert (s.mae, s.nmae) == (100.0, 1.0)


def test_categorical_examples():
    assert categorical_scores(["knit"], ["knit"], ["knit", "woven"]) == (1.0, 1.0)
    acc, f1 = categorical_scores(["knit", "knit", "woven"], ["knit", "woven", "woven"], ["knit", "woven"])
    assert acc == pytest.approx(2 / 3, abs=1e-15) and f1 == pytest.approx(2 / 3, abs=1e-15)
    acc, _ = categorical_scores(["a", "b", "c"], ["a", "a", "a"], ["a", "b", "c"])
    assert acc == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(UnknownLabel):
        categorical_scores(["a"], ["z"], ["a"])


def test_continuous_examples():
    assert continuous_error([1.0, 2.0], [1.0, 2.0]) == (0.0, 0.0)
    mae, nmae = continuous_error([0.0, 10.0], [1.0, 9.0])
    assert mae == 1.0 and nmae == pytest.approx(0.1, abs=1e-15)
    assert continuous_error([3.0, 3.0], [1.0, 3.0]) == (1.0, None)
    with pytest.raises(ZeroRange):
        continuous_error([3.0, 3.0], [1.0, 3.0], strict=True)
    with pytest.raises(LengthMismatch):
        continuous_error([1.0], [1.0, 2.0])


def test_chamfer_examples():
    a = np.random.default_rng(0).normal(size=(30, 3))
    assert chamfer(a, a) == 0.0
    for d in (1.0, 2.0, 10.0):
        assert chamfer([[0, 0, 0]], [[d, 0, 0]]) == d
    with pytest.raises(EmptyCloud):
        chamfer(np.zeros((0, 3)), a)


def test_voxel_iou_examples():
    assert voxel_iou(QUAD, QUAD) == 1.0
    far = (QUAD[0] + [1000, 0, 0], QUAD[1])
    assert voxel_iou(QUAD, far) == 0.0
    half = (QUAD[0] + [25, 0, 0], QUAD[1])
    assert voxel_iou(QUAD, half) == pytest.approx(voxel_iou_ref(QUAD, half, 50.0), abs=1e-9)


def test_voxel_iou_matches_dense_oracle():
    rng = np.random.default_rng(7)
    for _ in range(10):
        mk = lambda: (rng.uniform(0, 3, size=(4, 3)), np.array([[0, 1, 2], [1, 2, 3]]))  # noqa: E731
        a, b = mk(), mk()
        assert voxel_iou(a, b, 1.0) == pytest.approx(voxel_iou_ref(a, b, 1.0), abs=1e-9)


def test_cross_entropy_examples():
    assert weighted_cross_entropy([1.0, 1.0], [0, 1], [1.0, 1.0]) == 0.0
    p = [0.5, 0.25]
    assert weighted_cross_entropy(p, [0, 1], [1.0, 2.0]) == pytest.approx(-(math.log(0.5) + 2 * math.log(0.25)), abs=1e-15)
    assert weighted_cross_entropy(p, ["a", "b"], {"a": 1, "b": 1}) == pytest.approx(-sum(map(math.log, p)), abs=1e-15)
    with pytest.raises(ZeroProbability):
        weighted_cross_entropy([0.0], [0], [1.0])


def test_inverse_frequency_weights():
    assert inverse_frequency_weights({"a": 5, "b": 5}) == {"a": 1.0, "b": 1.0}
    w = inverse_frequency_weights({"a": 3, "b": 1})
    assert w["a"] == pytest.approx(2 / 3, abs=1e-15) and w["b"] == 2.0
    assert inverse_frequency_weights({"x": 7}) == {"x": 1.0}
    with pytest.raises(ZeroCount):
        inverse_frequency_weights({"a": 0})


def test_sequence_scores_identical():
    rep = geometry_sequence_scores([QUAD, QUAD], [QUAD, QUAD])
    assert [f["chamfer"] for f in rep["per_frame"]] == [0.0, 0.0]
    assert rep["mean"]["iou"] == 1.0
    with pytest.raises(LengthMismatch):
        geometry_sequence_scores([QUAD], [QUAD, QUAD])


# ---------------------------------------------------------------- properties

FIB = ["Cotton", "Polyester", "Elastane", "Wool", "Silk", "Nylon"]
fiber_sets = st.lists(st.sampled_from(FIB), min_size=1, max_size=4, unique=True)
pct_maps = st.dictionaries(st.sampled_from(FIB), st.floats(0.5, 100), min_size=1, max_size=4)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(fiber_sets, fiber_sets), min_size=1, max_size=8))
def test_material_matches_reference(pairs):
    gt, pred = [set(a) for a, _ in pairs], [set(b) for _, b in pairs]
    s = material_set_score(gt, pred)
    acc, f1 = material_ref([a for a, _ in pairs], [b for _, b in pairs])
    assert abs(s.accuracy - acc) <= 1e-12 and abs(s.f1 - f1) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(pct_maps, pct_maps), min_size=1, max_size=8))
def test_percentage_matches_reference(pairs):
    s = percentage_error([a for a, _ in pairs], [b for _, b in pairs])
    mae, nmae = percentage_ref([a for a, _ in pairs], [b for _, b in pairs])
    assert abs(s.mae - mae) <= 1e-12 and abs(s.nmae - nmae) <= 1e-12
    assert s.mae >= 0 and s.nmae <= 1


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("abcd")), min_size=1, max_size=15), st.permutations("abcd"))
def test_categorical_matches_reference_and_order_free(pairs, order):
    gt, pred = [a for a, _ in pairs], [b for _, b in pairs]
    got = categorical_scores(gt, pred, "abcd")
    assert got == categorical_scores(gt, pred, order)
    ref = categorical_ref(gt, pred)
    assert abs(got[0] - ref[0]) <= 1e-12 and abs(got[1] - ref[1]) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=20))
def test_continuous_matches_reference(pairs):
    gt, pred = [a for a, _ in pairs], [b for _, b in pairs]
    mae, nmae = continuous_error(gt, pred)
    rmae, rnmae = continuous_ref(gt, pred)
    assert abs(mae - rmae) <= 1e-12 * max(1.0, rmae)
    assert (nmae is None) == (rnmae is None)
    if nmae is not None:
        assert abs(nmae - rnmae) <= 1e-12 * max(1.0, rnmae)


clouds = st.integers(1, 12).flatmap(
    lambda n: st.lists(st.tuples(*[st.floats(-10, 10)] * 3), min_size=n, max_size=n)
)


@settings(max_examples=80, deadline=None)
@given(clouds, clouds, st.floats(0.1, 10))
def test_chamfer_properties(a, b, s):
    a, b = np.array(a), np.array(b)
    c = chamfer(a, b)
    assert c >= 0 and c == pytest.approx(chamfer(b, a), rel=1e-12, abs=1e-12)
    assert c == pytest.approx(chamfer_ref(a.tolist(), b.tolist()), rel=1e-9, abs=1e-9)
    assert chamfer(a * s, b * s) == pytest.approx(s * c, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.tuples(*[st.integers(-3, 3)] * 3))
def test_voxel_iou_translation_invariant(seed, shift):
    rng = np.random.default_rng(seed)
    a = (rng.uniform(0, 150, size=(4, 3)), np.array([[0, 1, 2], [1, 2, 3]]))
    b = (rng.uniform(0, 150, size=(4, 3)), np.array([[0, 1, 2], [1, 3, 2]]))
    iou = voxel_iou(a, b)
    t = np.array(shift, float) * 50.0
    moved = voxel_iou((a[0] + t, a[1]), (b[0] + t, b[1]))
    assert 0.0 <= iou <= 1.0
    assert moved == pytest.approx(iou, abs=1e-12)
