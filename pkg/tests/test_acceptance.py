"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import csv
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from helpers import random_ensemble, random_rows

from workshap import analysis, dataset, gbdt, synth, treeshap
from workshap.dataset import Dataset, SplitSpec
from workshap.pipeline import RunConfig, run
from workshap.schema import default_schema

SCHEMA = default_schema()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def csv_and_svg_bytes(root):
    files = sorted(p for ext in ("*.csv", "*.svg") for p in root.rglob(ext))
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in files}


# 1 -------------------------------------------------------------------------------------------


def test_01_local_accuracy(verdict):
    ds = synth.generate(synth.GeneratorSpec(n=1000, seed=101))
    t0 = time.perf_counter()
    model = gbdt.train(ds, "work", gbdt.Hyperparams())
    sv = treeshap.shap_values(model, ds)
    seconds = time.perf_counter() - t0
    margins = model.predict_margin(ds.X)
    rel = np.abs(sv.reconstruction() - margins) / np.abs(margins)
    ok = len(rel) == 1000 and float(rel.max()) <= 1e-6 and seconds < 10
    assert verdict(1, "Shapley local accuracy", ok, f"max rel error {rel.max():.2e}, {seconds:.2f} s")


# 2 -------------------------------------------------------------------------------------------


def _small_case(rng):
    n_features = int(rng.integers(2, 13))
    m = random_ensemble(rng, n_features=n_features, n_trees=int(rng.integers(1, 11)),
                        max_depth=int(rng.integers(1, 5)), n_categorical=int(rng.integers(0, min(3, n_features))))
    return m, random_rows(rng, m.schema, 1)[0]


def test_02_oracle_equivalence(verdict):
    rng = np.random.default_rng(20240202)
    t0 = time.perf_counter()
    shap_gap = 0.0
    for _ in range(500):
        m, x = _small_case(rng)
        phi, _ = treeshap.shap_brute_force(m, x)
        shap_gap = max(shap_gap, float(np.abs(treeshap.shap_values(m, x[None, :]).values[0] - phi).max()))
    inter_gap = 0.0
    for _ in range(100):
        m, x = _small_case(rng)
        ref = treeshap.interaction_brute_force(m, x)
        inter_gap = max(inter_gap, float(np.abs(treeshap.interaction_values(m, x[None, :]).values[0] - ref).max()))
    seconds = time.perf_counter() - t0
    ok = shap_gap <= 1e-8 and inter_gap <= 1e-8 and seconds < 120
    assert verdict(2, "oracle equivalence", ok,
                   f"500 SHAP cases max diff {shap_gap:.1e}, 100 interaction cases {inter_gap:.1e}, {seconds:.1f} s")


# 3 -------------------------------------------------------------------------------------------


def test_03_interaction_identities(verdict):
    ds = synth.generate(synth.GeneratorSpec(n=5000, seed=303))
    sub = dataset.weighted_subsample(ds, 300, 3)
    model = gbdt.train(ds, "work", gbdt.Hyperparams(num_trees=50))
    t = treeshap.interaction_values(model, sub)
    phi = treeshap.shap_values(model, sub).values
    symmetric = np.array_equal(t.values, np.swapaxes(t.values, 1, 2))
    row_gap = float(np.abs(t.values.sum(axis=2) - phi).max())

    # stumps split on one feature each, so the ensemble is additive
    stumps = gbdt.train(ds, "work", gbdt.Hyperparams(num_trees=50, max_leaves=2))
    ta = treeshap.interaction_values(stumps, sub).values
    off = ta.copy()
    off[:, np.arange(len(SCHEMA)), np.arange(len(SCHEMA))] = 0.0
    zero_rows = int(np.all(off == 0.0, axis=(1, 2)).sum())
    ok = symmetric and row_gap <= 1e-6 and zero_rows == len(sub)
    assert verdict(3, "interaction identities", ok,
                   f"symmetric={symmetric}, row-sum gap {row_gap:.1e}, additive zero rows {zero_rows}/{len(sub)}")


# 4 -------------------------------------------------------------------------------------------

# (unemployed, blue, white) per caste: general, Sc/St, OBC, unknown
CASTE_COUNTS = {
    "caste_general": (13_978, 3_068, 1_341),
    "caste_scst": (17_480, 11_235, 1_787),
    "caste_obc": (22_254, 8_730, 1_592),
    "caste_unknown": (230, 108, 13),
}


def caste_counts_dataset():
    row = np.array([30, 5, 0, 0, 0, 2, 4, 1, 2, 0, 0, 0, 0, 0, 0, 0], dtype=float)
    blocks, occ = [], []
    for caste, counts in CASTE_COUNTS.items():
        n = sum(counts)
        x = np.tile(row, (n, 1))
        x[:, SCHEMA.index(caste)] = 1
        blocks.append(x)
        occ.append(np.repeat([0, 1, 2], counts))
    return Dataset(SCHEMA, np.vstack(blocks), np.concatenate(occ), np.ones(sum(map(sum, CASTE_COUNTS.values()))))


def test_04_table_arithmetic(verdict):
    ds = caste_counts_dataset()
    balances = [round(dataset.class_balance(ds, e), 3) for e in ("work", "blue", "white")]
    scst = ds.where(ds.column("caste_scst") == 1)
    general = ds.where(ds.column("caste_general") == 1)
    scst_share = dataset.class_balance(scst, "work")
    general_share = dataset.class_balance(general, "work")
    ok = (balances == [0.341, 0.283, 0.058] and len(scst) == 30_502 and len(general) == 18_387
          and round(scst_share, 3) == 0.427 and round(general_share, 3) == 0.240
          and abs(general_share - 0.239) < 0.001)
    assert verdict(4, "table-derived arithmetic", ok,
                   f"balances {balances}, Sc/St {scst_share:.4f}, general {general_share:.4f} "
                   f"(reported as 23.9%, off by {general_share - 0.239:.4f})")


# 5 -------------------------------------------------------------------------------------------

PLANT_GRID = [{"num_trees": 100, "max_leaves": 15, "min_samples_leaf": 50}]


def plant_config(seed, experiment, scope, out):
    return RunConfig.from_dict({
        "seed": seed,
        "input": {"generator": {"n": 50_000}},
        "experiments": [experiment],
        "grid": PLANT_GRID,
        "split": {"folds": 2},
        "interaction_subsample": 1000,
        "attribution_scope": scope,
        "output_dir": str(out),
    })


@pytest.mark.slow
def test_05_planted_trend_recovery(verdict, tmp_path):
    t0 = time.perf_counter()
    run(plant_config(5, "work", "full", tmp_path / "work"))
    work_seconds = time.perf_counter() - t0
    rows = read_csv(tmp_path / "work" / "tables" / "cohort_curve_work.csv")
    ages = [float(r["age"]) for r in rows]
    rho = analysis.spearman(ages, [float(r["mean_abs_shap"]) for r in rows])
    planted = [synth.ground_truth_effect(synth.GeneratorSpec(), "caste_scst", a) for a in ages]
    assert np.all(np.diff(planted) > 0)

    correct, slowest = 0, work_seconds
    for seed in range(20):
        out = tmp_path / f"white{seed}"
        t0 = time.perf_counter()
        run(plant_config(1000 + seed, "white", "test", out))
        slowest = max(slowest, time.perf_counter() - t0)
        ex = read_csv(out / "tables" / "interaction_caste_scst_age_white.csv")
        phi = np.array([float(r["attribution"]) for r in ex])
        scst = np.array([float(r["caste_scst"]) for r in ex]) == 1
        age = np.array([float(r["color_age"]) for r in ex])
        young, old = phi[scst & (age < 35)].mean(), phi[scst & (age > 35)].mean()
        correct += bool(young > 0 > old)
    ok = rho > 0.8 and correct >= 19 and slowest < 300
    assert verdict(5, "planted-trend recovery", ok,
                   f"cohort curve Spearman with age {rho:.3f}, white-collar sign pattern {correct}/20, "
                   f"slowest run {slowest:.1f} s")


# 6 -------------------------------------------------------------------------------------------


def test_06_gbdt_training(verdict):
    monotone = 0
    for seed in range(10):
        ds = synth.generate(synth.GeneratorSpec(n=2000, seed=600 + seed))
        m = gbdt.train(ds, ("work", "blue", "white")[seed % 3], gbdt.Hyperparams(num_trees=40))
        monotone += bool(np.all(np.diff(m.train_loss) <= 0))

    rng = np.random.default_rng(6)
    base = synth.generate(synth.GeneratorSpec(n=800, seed=606))
    w = rng.integers(1, 5, len(base)).astype(float)
    weighted = Dataset(SCHEMA, base.X, base.occupation, w)
    idx = np.repeat(np.arange(len(base)), w.astype(int))
    duplicated = Dataset(SCHEMA, base.X[idx], base.occupation[idx], np.ones(len(idx)))
    hp = gbdt.Hyperparams(num_trees=20, min_samples_leaf=10)
    equivalent = gbdt.train(weighted, "work", hp) == gbdt.train(duplicated, "work", hp)

    sep = synth.generate(synth.GeneratorSpec(n=3000, seed=607))
    occ = np.where(sep.column("age") > 35, 1, 0)
    sep = Dataset(SCHEMA, sep.X, occ, sep.weights)
    acc = gbdt.evaluate(gbdt.train(sep, "work", gbdt.Hyperparams()), sep, "work").accuracy
    ok = monotone == 10 and equivalent and acc == 1.0
    assert verdict(6, "GBDT training properties", ok,
                   f"non-increasing loss {monotone}/10, duplicate==weight {equivalent}, separable accuracy {acc}")


# 7 -------------------------------------------------------------------------------------------


def test_07_split_and_folds(verdict):
    ds = synth.generate(synth.GeneratorSpec(n=10_000, seed=707))
    worst, folds_ok = 0.0, 0
    for seed in range(100):
        for exp in ("work", "blue", "white"):
            train, _ = dataset.stratified_split(ds, exp, SplitSpec(seed=seed))
            worst = max(worst, abs(dataset.class_balance(train, exp) - dataset.class_balance(ds, exp)))
        parts = dataset.kfold(ds, ("work", "blue", "white")[seed % 3], SplitSpec(seed=seed))
        ids = np.concatenate([valid.sample_ids for _, valid in parts])
        disjoint_cover = len(ids) == len(ds) and np.array_equal(np.sort(ids), np.sort(ds.sample_ids))
        complements = all(len(tr) + len(va) == len(ds) and not np.intersect1d(tr.sample_ids, va.sample_ids).size
                          for tr, va in parts)
        folds_ok += bool(disjoint_cover and complements)
    ok = worst < 0.005 and folds_ok == 100
    assert verdict(7, "split and fold guarantees", ok,
                   f"max balance drift {worst:.5f} over 100 seeds x 3 experiments, folds valid {folds_ok}/100")


# 8 -------------------------------------------------------------------------------------------


def test_08_spearman_unit_checks(verdict):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(200, 100))
    self_ok = reverse_ok = True
    for j in range(100):
        m = analysis.spearman_matrix(np.column_stack([X[:, j], X[:, j], -X[:, j]])).values
        self_ok &= m[0, 1] == 1.0
        reverse_ok &= m[0, 2] == -1.0
    transforms = [np.exp, np.arctan, lambda v: v ** 3, lambda v: 2.5 * v + 7, np.sinh]
    Y = np.column_stack([transforms[j % len(transforms)](X[:, j]) for j in range(100)])
    invariant = np.array_equal(analysis.spearman_matrix(X).values, analysis.spearman_matrix(Y).values)
    ok = self_ok and reverse_ok and invariant
    assert verdict(8, "Spearman unit checks", ok,
                   f"self 1.0 {self_ok}, reversal -1.0 {reverse_ok}, monotone invariance on 100 columns {invariant}")


# 9 -------------------------------------------------------------------------------------------


@pytest.mark.slow
def test_09_cli_determinism(verdict, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "seed": 909,
        "input": {"generator": {"n": 2000}},
        "experiments": ["work", "blue", "white"],
        "grid": [{"num_trees": 10, "max_leaves": 7}, {"num_trees": 20, "max_leaves": 15}],
        "split": {"test_fraction": 0.1, "folds": 3},
        "interaction_subsample": 200,
        "bootstrap": {"count": 2, "fraction": 0.5},
    }))
    outputs = []
    for name, extra, env in (("a", ["--threads", "1"], {}), ("b", ["--threads", "1"], {}),
                             ("c", [], {"WORKSHAP_NUM_THREADS": "4"})):
        cmd = [sys.executable, "-m", "workshap.cli", "run", "--config", str(cfg), "--out", str(tmp_path / name), *extra]
        proc = subprocess.run(cmd, capture_output=True, text=True, env={**os.environ, **env})
        assert proc.returncode == 0, proc.stderr
        outputs.append(csv_and_svg_bytes(tmp_path / name))
    n_csv = sum(k.endswith(".csv") for k in outputs[0])
    ok = n_csv > 20 and outputs[0] == outputs[1] == outputs[2]
    assert verdict(9, "pipeline determinism", ok,
                   f"{n_csv} CSV and {len(outputs[0]) - n_csv} SVG files identical across 3 runs, 1 and 4 threads")


# 10 ------------------------------------------------------------------------------------------


@pytest.mark.slow
def test_10_bootstrap_robustness(verdict, tmp_path):
    cfg = RunConfig.from_dict({
        "seed": 1010,
        "input": {"generator": {"n": 20_000}},
        "experiments": ["work"],
        "grid": PLANT_GRID,
        "split": {"folds": 2},
        "interaction_subsample": 500,
        "bootstrap": {"count": 5, "fraction": 0.8},
        "output_dir": str(tmp_path),
    })
    run(cfg)
    rows = read_csv(tmp_path / "tables" / "robustness_work.csv")
    boot = [float(r["spearman"]) for r in rows
            if r["curve_a"].startswith("boot") and r["curve_b"].startswith("boot")]
    held_out = [float(r["spearman"]) for r in rows if {r["curve_a"], r["curve_b"]} == {"model", "test_only"}]
    mean = float(np.mean(boot))
    ok = len(boot) == 10 and mean > 0.7
    assert verdict(10, "bootstrap robustness", ok,
                   f"mean pairwise Spearman {mean:.3f} over {len(boot)} pairs, min {min(boot):.3f}; "
                   f"full vs test-only {held_out[0]:.3f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", *sys.argv[1:]]))
