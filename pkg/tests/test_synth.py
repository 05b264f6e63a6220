import numpy as np
import pytest
from scipy.special import expit

from workshap import analysis, dataset, gbdt, synth, treeshap
from workshap.errors import GenerationError
from workshap.schema import default_schema

SCHEMA = default_schema()


def null_spec(**kw):
    zero = {"intercept": 0.0, "linear": {}, "gamma_caste_age": 0.0}
    return synth.GeneratorSpec(coefficients={"work": zero, "white": zero}, **kw)


def test_deterministic_under_seed():
    a = synth.generate(synth.GeneratorSpec(n=500, seed=3))
    b = synth.generate(synth.GeneratorSpec(n=500, seed=3))
    c = synth.generate(synth.GeneratorSpec(n=500, seed=4))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.occupation, b.occupation)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.X, c.X)


def test_samples_are_schema_valid_and_consistent():
    ds = synth.generate(synth.GeneratorSpec(n=5000, seed=1))
    for j, f in enumerate(SCHEMA):  # the Dataset constructor validates too
        col = ds.X[:, j]
        assert np.all(col == np.round(col))
        if f.is_categorical:
            assert col.min() >= 0 and col.max() < f.n_categories
        else:
            assert col.min() >= f.low and col.max() <= f.high
    caste = ds.X[:, list(SCHEMA.caste_indices)]
    assert np.all(caste.sum(axis=1) == 1)
    work, blue, white = ds.labels("work"), ds.labels("blue"), ds.labels("white")
    assert not np.any(blue & white)
    assert np.array_equal(work, blue | white)
    assert np.all(ds.weights > 0)
    assert ds.provenance == "synthetic"


def test_csv_round_trip(tmp_path):
    ds = synth.generate(synth.GeneratorSpec(n=300, seed=2))
    dataset.write_csv(ds, tmp_path / "s.csv")
    back = dataset.load_csv(tmp_path / "s.csv", SCHEMA)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.weights, ds.weights)


def test_spec_json_round_trip(tmp_path):
    spec = synth.GeneratorSpec(n=123, seed=9, target_balance={"work": 0.4})
    spec.to_json(tmp_path / "g.json")
    back = synth.GeneratorSpec.from_json(tmp_path / "g.json")
    assert back.to_dict() == spec.to_dict()
    assert np.array_equal(synth.generate(back).X, synth.generate(spec).X)


def test_invalid_specs():
    with pytest.raises(GenerationError):
        synth.GeneratorSpec(n=0)
    with pytest.raises(GenerationError):
        synth.GeneratorSpec(coefficients={"blue": {}})
    with pytest.raises(GenerationError):
        synth.GeneratorSpec(weight_model={"kind": "pareto"})
    with pytest.raises(GenerationError):
        synth.GeneratorSpec(caste_probs=(1, 1, 1))
    with pytest.raises(GenerationError):
        synth.LogitModel.from_dict({"beta": 1})


def test_sigmoid_example():
    coef = {"intercept": -1.0, "linear": {"caste_scst": 0.5}, "gamma_caste_age": 1.0}
    spec = synth.GeneratorSpec(coefficients={"work": coef})
    x = synth.generate(synth.GeneratorSpec(n=1, seed=0)).X.copy()
    x[0, list(SCHEMA.caste_indices)] = 0
    x[0, SCHEMA.index("caste_scst")] = 1
    # neutralise every other feature by standardising at its configured mean
    for name, m in spec.marginals.items():
        if m["kind"] == "integer_normal" and name != "age":
            x[0, SCHEMA.index(name)] = m["mean"]
    for name in ("residence_type", "anemic", "obese"):
        x[0, SCHEMA.index(name)] = 0
    probs = []
    for age in (49, 21):
        x[0, SCHEMA.index("age")] = age
        probs.append(float(expit(synth.logit(spec, x, "work"))[0]))
    assert probs[0] == pytest.approx(expit(-0.5 + 1), abs=1e-12) == pytest.approx(0.622, abs=1e-3)
    assert probs[1] == pytest.approx(expit(-0.5 - 1), abs=1e-12) == pytest.approx(0.182, abs=1e-3)


def test_null_model_balance():
    ds = synth.generate(null_spec(n=20_000, seed=5))
    assert dataset.class_balance(ds, "work") == pytest.approx(0.5, abs=0.02)


def test_null_model_cohort_curve_is_flat():
    ds = synth.generate(null_spec(n=8000, seed=6))
    m = gbdt.train(ds, "work", gbdt.Hyperparams(num_trees=20, max_leaves=8, min_samples_leaf=100))
    c = analysis.cohort_curve(treeshap.shap_values(m, ds), ds)
    # all cohort intervals overlap a common band
    assert max(p.ci_low for p in c.points) <= min(p.ci_high for p in c.points) + 0.02


def test_age_mean_matches_calibration():
    ds = synth.generate(synth.GeneratorSpec(n=100_000, seed=7))
    assert abs(ds.column("age").mean() - 33.765) < 0.2
    caste = ds.X[:, list(SCHEMA.caste_indices)].mean(axis=0)
    assert np.allclose(caste, synth.CASTE_PROBS, atol=0.01)


def test_target_balance_hit():
    for seed in range(3):
        spec = synth.GeneratorSpec(n=10_000, seed=seed, target_balance={"work": 0.341, "white": 0.17})
        ds = synth.generate(spec)
        assert abs(dataset.class_balance(ds, "work") - 0.341) <= 0.03
        work = ds.labels("work").astype(bool)
        assert abs(ds.labels("white")[work].mean() - 0.17) <= 0.03


def test_infeasible_target():
    with pytest.raises(GenerationError):
        synth.generate(synth.GeneratorSpec(n=100, target_balance={"work": 1.0}))
    with pytest.raises(GenerationError):
        synth.generate(synth.GeneratorSpec(n=100, target_balance={"work": 0.0}))


def test_integer_normal_marginal_hits_mean():
    k, probs = synth.integer_normal(2.0, 1.5, 0, 8)
    assert np.array_equal(k, np.arange(9)) and probs.sum() == pytest.approx(1.0)
    assert np.dot(k, probs) == pytest.approx(2.0, abs=1e-8)
    with pytest.raises(GenerationError):
        synth.integer_normal(9.0, 1.0, 0, 8)


def test_ground_truth_effect_examples():
    spec = synth.GeneratorSpec()
    spec.coefficients["work"] = synth.LogitModel(-1.0, {"caste_scst": 0.5}, 1.0)
    assert synth.ground_truth_effect(spec, "caste_scst", 35, interaction_only=True) == 0.0
    assert synth.ground_truth_effect(spec, "caste_scst", 49, interaction_only=True) == 1.0
    assert synth.ground_truth_effect(spec, "caste_scst", 49) == 1.5
    assert synth.ground_truth_effect(spec, "caste_scst", 49, value=0.0) == 0.0
    flat = synth.GeneratorSpec()
    flat.coefficients["work"] = synth.LogitModel(-1.0, {"caste_scst": 0.5}, 0.0)
    effects = {synth.ground_truth_effect(flat, "caste_scst", a) for a in range(21, 50)}
    assert effects == {0.5}
    with pytest.raises(GenerationError):
        synth.ground_truth_effect(spec, "caste_scst", 30, experiment="blue")


def test_default_white_plant_has_opposite_sign():
    spec = synth.GeneratorSpec()
    young = synth.ground_truth_effect(spec, "caste_scst", 21, experiment="white", interaction_only=True)
    old = synth.ground_truth_effect(spec, "caste_scst", 49, experiment="white", interaction_only=True)
    assert young > 0 > old
    assert synth.ground_truth_effect(spec, "caste_scst", 49, interaction_only=True) > 0
