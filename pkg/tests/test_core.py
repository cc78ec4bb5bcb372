import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dbaexplain.core import (
    ConsistencyError,
    Dataset,
    DatasetError,
    Explanation,
    FunctionClassifier,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    jsonable,
    load_dataset,
    make_rng,
    sign_labels,
    substream,
    write_dataset,
)
from dbaexplain.datagen import AIRIS_SDS, gen_airis_tab


def _csv(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# --- load_dataset ---------------------------------------------------------


def test_load_three_rows_maps_01_labels(tmp_path):
    p = _csv(tmp_path, "a,b,label\n1,2,0\n3,4,1\n5,6,1\n")
    ds = load_dataset(p)
    assert ds.n == 3 and ds.d == 2
    np.testing.assert_array_equal(ds.labels, [-1, 1, 1])
    assert ds.label_mapping == {"0": -1, "1": 1}
    assert ds.feature_names == ("a", "b")


def test_text_cell_error_names_row_and_column(tmp_path):
    p = _csv(tmp_path, "a,b,label\n1,2,0\n3,oops,1\n")
    with pytest.raises(DatasetError, match=r"row 3.*'b'"):
        load_dataset(p)


def test_single_class_rejected(tmp_path):
    p = _csv(tmp_path, "a,label\n1,x\n2,x\n")
    with pytest.raises(DatasetError, match="two distinct"):
        load_dataset(p)


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_dataset(tmp_path / "nope.csv")


def test_missing_label_column(tmp_path):
    p = _csv(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DatasetError, match="label column"):
        load_dataset(p)


def test_mixed_binary_continuous_round_trip(tmp_path):
    # heart-disease-like: binary and continuous columns plus text labels
    rng = np.random.default_rng(0)
    n = 50
    X = np.column_stack([rng.integers(0, 2, n), rng.normal(130, 15, n), rng.uniform(size=n) * 1e-7])
    y = np.where(rng.random(n) < 0.5, -1, 1)
    ds = Dataset(X, y, ("sex", "trestbps", "tiny"), label_mapping={"absent": -1, "present": 1})
    write_dataset(ds, tmp_path / "h.csv")
    back = load_dataset(tmp_path / "h.csv")
    assert back.d == 3
    np.testing.assert_array_equal(back.points, X)  # repr round trip is exact
    np.testing.assert_array_equal(back.labels, y)


def test_attribute_columns_round_trip(tmp_path):
    ds = gen_airis_tab(30, 1)
    write_dataset(ds, tmp_path / "a.csv")
    back = load_dataset(tmp_path / "a.csv")
    assert back.feature_names == ds.feature_names
    assert back.attribute_names == ds.attribute_names
    np.testing.assert_array_equal(back.attributes, ds.attributes)


def test_label_mapping_stable_across_reloads(tmp_path):
    p = _csv(tmp_path, "x,label\n1,yes\n2,no\n3,yes\n")
    a, b = load_dataset(p), load_dataset(p)
    assert a.label_mapping == b.label_mapping == {"no": -1, "yes": 1}
    # bijection: two originals, two targets
    assert sorted(a.label_mapping.values()) == [-1, 1]


def test_dataset_invariants():
    with pytest.raises(DatasetError):
        Dataset(np.zeros((3, 2)), [1, -1], ("a", "b"))
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 2)), [1, 0], ("a", "b"))
    with pytest.raises(DatasetError):
        Dataset(np.zeros((2, 2)), [1, -1], ("a",))
    ds = Dataset(np.zeros((2, 2)), [1, 1], ("a", "b"))
    with pytest.raises(DatasetError):
        ds.require_both_classes()
    with pytest.raises(ValueError):
        ds.points[0, 0] = 1.0


# --- standardizer ---------------------------------------------------------


def test_two_point_column_population_sd():
    ds = Dataset(np.array([[0.0], [2.0]]), [1, -1], ("c",))
    s = fit_standardizer(ds)
    assert s.means[0] == 1.0 and s.sds[0] == 1.0


def test_airis_color_sd_matches_uniform_formula():
    ds = gen_airis_tab(200_000, 11)
    s = fit_standardizer(ds)
    # Table value 0.202 = (0.8 - 0.1) / sqrt(12)
    assert abs(AIRIS_SDS[4] - 0.7 / math.sqrt(12)) < 1e-15
    assert round(AIRIS_SDS[4], 3) == 0.202
    assert abs(s.sds[4] - 0.202) < 0.002


def test_constant_column_named_in_error():
    ds = Dataset(np.array([[1.0, 5.0], [2.0, 5.0]]), [1, -1], ("ok", "flat"))
    with pytest.raises(DatasetError, match="'flat'"):
        fit_standardizer(ds)


def test_apply_special_points():
    s = Standardizer([1.0, -2.0, 3.0], [0.5, 2.0, 4.0])
    np.testing.assert_array_equal(apply_standardizer(s, s.means), np.zeros(3))
    np.testing.assert_allclose(apply_standardizer(s, s.means + s.sds), np.ones(3), rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        apply_standardizer(s, np.zeros(2))


@settings(max_examples=200, deadline=None)
@given(
    x=arrays(np.float64, 4, elements=st.floats(-1e6, 1e6)),
    means=arrays(np.float64, 4, elements=st.floats(-1e3, 1e3)),
    sds=arrays(np.float64, 4, elements=st.floats(1e-3, 1e3)),
)
def test_standardize_round_trip(x, means, sds):
    s = Standardizer(means, sds)
    back = s.invert(s.apply(x))
    np.testing.assert_allclose(back, x, rtol=1e-12, atol=1e-12 * (np.abs(means) + sds * 1e3).max())


def test_standardized_training_columns_are_unit():
    ds = gen_airis_tab(1000, 2)
    z = fit_standardizer(ds).transform(ds).points
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)


def test_standardizer_json_round_trip():
    s = Standardizer([1.0, 2.0], [3.0, 4.0], ("a", "b"))
    back = Standardizer.from_dict(json.loads(s.to_json()))
    np.testing.assert_array_equal(back.means, s.means)
    np.testing.assert_array_equal(back.sds, s.sds)
    assert back.feature_names == ("a", "b")


def test_standardizer_rejects_nonpositive_sd():
    with pytest.raises(ValueError):
        Standardizer([0.0], [0.0])


# --- randomness -----------------------------------------------------------


def test_substreams_are_named_not_ordered():
    a1 = make_rng(5, "lime", 3).random(4)
    make_rng(5, "simulation", 3).random(100)  # unrelated draws in between
    a2 = make_rng(5, "lime", 3).random(4)
    np.testing.assert_array_equal(a1, a2)
    assert not np.array_equal(a1, make_rng(5, "lime", 4).random(4))
    assert not np.array_equal(a1, make_rng(6, "lime", 3).random(4))


def test_substream_nesting_matches_flat_keys():
    nested = make_rng(substream(substream(9, "a"), 2)).random(3)
    flat = make_rng(9, "a", 2).random(3)
    np.testing.assert_array_equal(nested, flat)


def test_generator_passthrough_refuses_keys():
    g = np.random.default_rng(0)
    assert make_rng(g) is g
    with pytest.raises(ValueError):
        make_rng(g, "x")


# --- classifier contract --------------------------------------------------


def test_sign_labels_tie_goes_positive():
    np.testing.assert_array_equal(sign_labels(np.array([-1e-300, 0.0, 2.0])), [-1, 1, 1])


def test_function_classifier_single_and_batch():
    f = FunctionClassifier(proba_fn=lambda X: (X[:, 0] > 0).astype(float))
    assert f.predict(np.array([1.0, 0.0])) == 1
    assert f.predict(np.array([-1.0, 0.0])) == -1
    np.testing.assert_array_equal(f.predict(np.array([[1.0, 0], [-1.0, 0]])), [1, -1])
    assert f.predict_proba(np.array([2.0, 0.0])) == 1.0


def test_consistency_check_catches_disagreement():
    f = FunctionClassifier(
        label_fn=lambda X: np.ones(len(X), dtype=int),
        proba_fn=lambda X: np.full(len(X), 0.2),
        check_consistency=True,
    )
    with pytest.raises(ConsistencyError):
        f.predict(np.zeros((3, 2)))


def test_soft_or_hard_without_probabilities():
    f = FunctionClassifier(label_fn=lambda X: np.where(X[:, 0] > 0, 1, -1))
    assert not f.has_proba
    np.testing.assert_array_equal(f.soft_or_hard(np.array([[1.0], [-1.0]])), [1.0, 0.0])
    with pytest.raises(NotImplementedError):
        f.predict_proba(np.zeros((1, 1)))


# --- explanation ----------------------------------------------------------


def test_explanation_names_must_match():
    with pytest.raises(ValueError):
        Explanation(np.ones(3), 0.0, ("a", "b"), "dba-tab")


def test_explanation_json_has_no_nan_or_inf():
    e = Explanation(np.array([1.0, -2.0]), 0.5, ("a", "b"), "dba-tab",
                    diagnostics={"distances": {"0.1": math.inf, "0.2": math.nan, "0.3": np.float64(0.4)},
                                 "arr": np.array([np.inf, 1.0])})
    text = json.dumps(e.to_dict(), allow_nan=False)
    d = json.loads(text)
    assert d["diagnostics"]["distances"] == {"0.1": None, "0.2": None, "0.3": 0.4}
    assert d["diagnostics"]["arr"] == [None, 1.0]
    np.testing.assert_array_equal(e.decision(np.array([[1.0, 1.0]])), [-0.5])


def test_jsonable_numpy_scalars():
    assert jsonable({"a": np.int64(3), "b": np.bool_(True), 1: (np.float32(0.5),)}) == {"a": 3, "b": True, "1": [0.5]}
