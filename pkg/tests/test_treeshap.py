import numpy as np
import pytest
from helpers import random_ensemble, random_rows, random_survey, small_schema
from hypothesis import given, settings
from hypothesis import strategies as st

from workshap import gbdt, treeshap
from workshap.errors import OracleLimitError, SchemaError
from workshap.gbdt import Tree, TreeEnsemble
from workshap.schema import default_schema


def stump(feature, threshold, a, b, n_a, n_b):
    return Tree([feature, -1, -1], [threshold, 0, 0], [1, -1, -1], [2, -1, -1], [0.0, a, b], [n_a + n_b, n_a, n_b])


def xor_tree(values=(1.0, -2.0, 3.0, 0.5), cover=1.0):
    # f0 <= 0.5 ? (f1 <= 0.5 ? v0 : v1) : (f1 <= 0.5 ? v2 : v3)
    feature = [0, 1, -1, -1, 1, -1, -1]
    left = [1, 2, -1, -1, 5, -1, -1]
    right = [4, 3, -1, -1, 6, -1, -1]
    value = [0, 0, values[0], values[1], 0, values[2], values[3]]
    cov = [4 * cover, 2 * cover, cover, cover, 2 * cover, cover, cover]
    return Tree(feature, [0.5] * 7, left, right, value, cov)


# -- conditional expectation ---------------------------------------------------------------


def test_conditional_expectation_all_features_is_margin():
    rng = np.random.default_rng(0)
    m = random_ensemble(rng, n_features=5)
    for x in random_rows(rng, m.schema, 20):
        assert treeshap.conditional_expectation(m, x, range(5)) == pytest.approx(m.predict_margin(x), abs=1e-12)


def test_conditional_expectation_empty_set_cover_average():
    m = TreeEnsemble([stump(0, 4.5, 2.0, -1.0, 3.0, 1.0)], 0.25, small_schema(2))
    assert treeshap.conditional_expectation(m, [0, 0], []) == 0.25 + (3 * 2.0 + 1 * -1.0) / 4


def test_conditional_expectation_single_leaf():
    m = TreeEnsemble([Tree.leaf(1.5)], -0.5, small_schema(3))
    for s in ([], [0], [0, 1, 2]):
        assert treeshap.conditional_expectation(m, [1, 2, 3], s) == 1.0


# -- brute-force oracle ---------------------------------------------------------------------


def test_oracle_single_leaf_is_zero():
    m = TreeEnsemble([Tree.leaf(1.5)], 0.0, small_schema(3))
    phi, base = treeshap.shap_brute_force(m, [1, 2, 3])
    assert np.all(phi == 0) and base == 1.5


def test_oracle_depth_one_tree():
    m = TreeEnsemble([stump(0, 4.5, 2.0, -1.0, 3.0, 1.0)], 0.0, small_schema(3))
    x = np.array([7.0, 1.0, 1.0])
    phi, base = treeshap.shap_brute_force(m, x)
    assert phi[0] == pytest.approx(m.predict_margin(x) - base)
    assert phi[1] == phi[2] == 0.0


def test_oracle_xor_symmetry():
    m = TreeEnsemble([xor_tree((0.0, 1.0, 1.0, 0.0))], 0.0, small_schema(2))
    phi, _ = treeshap.shap_brute_force(m, [1.0, 1.0])
    assert phi[0] == pytest.approx(phi[1])
    inter = treeshap.interaction_brute_force(m, [1.0, 1.0])
    assert abs(inter[0, 1]) > 0 and inter[0, 1] == inter[1, 0]


def test_oracle_caps():
    big = TreeEnsemble([], 0.0, small_schema(16))
    with pytest.raises(OracleLimitError):
        treeshap.shap_brute_force(big, np.zeros(16))
    with pytest.raises(OracleLimitError):
        treeshap.interaction_brute_force(TreeEnsemble([], 0.0, small_schema(13)), np.zeros(13))


# -- fast path vs oracle -----------------------------------------------------------------------


def _random_case(rng):
    n_features = int(rng.integers(2, 13))
    m = random_ensemble(
        rng,
        n_features=n_features,
        n_trees=int(rng.integers(1, 11)),
        max_depth=int(rng.integers(1, 5)),
        n_categorical=int(rng.integers(0, min(3, n_features))),
    )
    return m, random_rows(rng, m.schema, 1)[0]


def test_shap_matches_oracle_on_500_random_ensembles():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(500):
        m, x = _random_case(rng)
        fast = treeshap.shap_values(m, x[None, :])
        phi, base = treeshap.shap_brute_force(m, x)
        worst = max(worst, float(np.max(np.abs(fast.values[0] - phi))))
        assert fast.base_value == pytest.approx(base, abs=1e-12)
    assert worst <= 1e-8


def test_interactions_match_oracle_on_100_random_ensembles():
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(100):
        m, x = _random_case(rng)
        fast = treeshap.interaction_values(m, x[None, :]).values[0]
        worst = max(worst, float(np.max(np.abs(fast - treeshap.interaction_brute_force(m, x)))))
    assert worst <= 1e-8


# -- properties -----------------------------------------------------------------------------------


def test_local_accuracy_and_dummy_feature():
    rng = np.random.default_rng(3)
    schema = small_schema(6)
    trees = [t for t in (random_ensemble(rng, schema=schema, n_trees=8).trees)]
    m = TreeEnsemble(trees, 0.1, schema)
    X = random_rows(rng, schema, 200)
    sv = treeshap.shap_values(m, X)
    assert sv.local_accuracy_error(m.predict_margin(X)) <= 1e-12
    unused = set(range(6)) - {f for t in trees for f in t.features_used()}
    for j in unused:
        assert np.all(sv.values[:, j] == 0.0)


def test_never_split_feature_gets_zero():
    schema = small_schema(4)
    m = TreeEnsemble([stump(0, 3.5, 1.0, -1.0, 2.0, 5.0), stump(2, 6.5, 0.3, 0.1, 4.0, 1.0)], 0.0, schema)
    X = random_rows(np.random.default_rng(4), schema, 50)
    sv = treeshap.shap_values(m, X)
    assert np.all(sv.values[:, [1, 3]] == 0.0)


def test_additivity_across_trees():
    rng = np.random.default_rng(5)
    schema = small_schema(5, n_categorical=1)
    a = random_ensemble(rng, schema=schema, n_trees=3)
    b = random_ensemble(rng, schema=schema, n_trees=4)
    both = TreeEnsemble(a.trees + b.trees, a.base_score + b.base_score, schema)
    X = random_rows(rng, schema, 30)
    sa, sb, sab = (treeshap.shap_values(m, X) for m in (a, b, both))
    assert np.allclose(sab.values, sa.values + sb.values, atol=1e-12)
    assert sab.base_value == pytest.approx(sa.base_value + sb.base_value)


def test_interaction_identities_on_trained_model():
    ds = random_survey(np.random.default_rng(6), 800)
    m = gbdt.train(ds, "work", gbdt.Hyperparams(num_trees=20, max_leaves=8, min_samples_leaf=5))
    sub = ds.take(np.arange(60))
    t = treeshap.interaction_values(m, sub)
    sv = treeshap.shap_values(m, sub)
    assert np.array_equal(t.values, np.swapaxes(t.values, 1, 2))
    assert np.max(np.abs(t.values.sum(axis=2) - sv.values)) <= 1e-6
    total = t.base_value + t.values.sum(axis=(1, 2))
    assert np.max(np.abs(total - m.predict_margin(sub.X))) <= 1e-6
    me = treeshap.main_effects(t)
    off = t.values.sum(axis=2) - me
    assert np.max(np.abs(me + off - sv.values)) <= 1e-6


def test_additive_model_has_zero_off_diagonal():
    schema = small_schema(3)
    m = TreeEnsemble([stump(0, 4.5, 1.0, -1.0, 3.0, 2.0), stump(1, 2.5, 0.5, 2.0, 1.0, 4.0),
                      stump(0, 7.5, -0.3, 0.9, 6.0, 1.0)], 0.0, schema)
    X = random_rows(np.random.default_rng(7), schema, 40)
    t = treeshap.interaction_values(m, X)
    sv = treeshap.shap_values(m, X)
    off = t.values.copy()
    off[:, np.arange(3), np.arange(3)] = 0.0
    assert np.all(off == 0.0)
    assert np.array_equal(treeshap.main_effects(t), sv.values)


def test_main_effects_of_zero_tensor():
    t = treeshap.InteractionTensor(np.zeros((3, 2, 2)), 0.0, None, ["a", "b"])
    assert np.all(treeshap.main_effects(t) == 0.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_trees=st.integers(1, 6), depth=st.integers(1, 5))
def test_property_local_accuracy_and_symmetry(seed, n_trees, depth):
    rng = np.random.default_rng(seed)
    m = random_ensemble(rng, n_features=5, n_trees=n_trees, max_depth=depth, n_categorical=1)
    X = random_rows(rng, m.schema, 4)
    sv = treeshap.shap_values(m, X)
    margins = m.predict_margin(X)
    assert np.all(np.abs(sv.reconstruction() - margins) <= 1e-9 * np.maximum(1, np.abs(margins)))
    t = treeshap.interaction_values(m, X)
    assert np.array_equal(t.values, np.swapaxes(t.values, 1, 2))
    assert np.allclose(t.values.sum(axis=2), sv.values, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 10))
def test_property_scaling_leaf_values_scales_attributions(seed, scale):
    rng = np.random.default_rng(seed)
    m = random_ensemble(rng, n_features=4, n_trees=3)
    scaled = TreeEnsemble([Tree(t.feature, t.threshold, t.left, t.right, t.value * scale, t.cover, t.categories)
                           for t in m.trees], m.base_score * scale, m.schema)
    X = random_rows(rng, m.schema, 3)
    assert np.allclose(treeshap.shap_values(scaled, X).values, scale * treeshap.shap_values(m, X).values,
                       atol=1e-9)


# -- containers and IO --------------------------------------------------------------------------


def test_schema_mismatch_rejected():
    ds = random_survey(np.random.default_rng(8), 50)
    m = TreeEnsemble([], 0.0, small_schema(16))
    with pytest.raises(SchemaError):
        treeshap.shap_values(m, ds)
    with pytest.raises(SchemaError):
        treeshap.shap_values(TreeEnsemble([], 0.0, default_schema()), np.zeros((2, 5)))


def test_dataset_ids_are_carried():
    ds = random_survey(np.random.default_rng(9), 40).take(np.arange(10, 30))
    model = TreeEnsemble([Tree.leaf(0.2)], 0.0, default_schema())
    sv = treeshap.shap_values(model, ds)
    assert np.array_equal(sv.sample_ids, ds.sample_ids)


def test_binary_dump_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    m = random_ensemble(rng, n_features=4)
    X = random_rows(rng, m.schema, 7)
    sv = treeshap.shap_values(m, X)
    sv.save(tmp_path / "shap")
    back = treeshap.ShapMatrix.load(tmp_path / "shap")
    assert np.array_equal(back.values, sv.values) and back.base_value == sv.base_value
    assert back.feature_names == sv.feature_names
    t = treeshap.interaction_values(m, X)
    t.save(tmp_path / "inter")
    tb = treeshap.InteractionTensor.load(tmp_path / "inter")
    assert np.array_equal(tb.values, t.values)
    assert np.load(tmp_path / "inter.values.npy", mmap_mode="r").flags.f_contiguous
    with pytest.raises(SchemaError):
        treeshap.ShapMatrix.load(tmp_path / "inter")


def test_long_csv_export(tmp_path):
    sv = treeshap.ShapMatrix(np.array([[0.5, -0.25]]), 0.1, [7], ["a", "b"])
    sv.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["sample_id,feature,value", "7,a,0.5", "7,b,-0.25"]
    t = treeshap.InteractionTensor(np.arange(4.0).reshape(1, 2, 2), 0.0, [3], ["a", "b"])
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "sample_id,feature,feature_2,value" and lines[2] == "3,a,b,1.0"
