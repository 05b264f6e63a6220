"""Random ensembles and datasets shared by the test modules."""

import numpy as np

from workshap.dataset import Dataset
from workshap.gbdt import Tree, TreeEnsemble
from workshap.schema import BINARY, CATEGORICAL, NUMERIC, FeatureSchema, FeatureSpec, default_schema


def small_schema(n_features, n_categorical=0, n_categories=5):
    specs = []
    for j in range(n_features):
        if j < n_categorical:
            specs.append(FeatureSpec(f"c{j}", CATEGORICAL, n_categories=n_categories))
        else:
            specs.append(FeatureSpec(f"x{j}", NUMERIC, 0, 9))
    return FeatureSchema(specs)


def random_tree(rng, schema, max_depth, split_prob=0.8):
    cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "cover", "categories")}

    def node(depth):
        i = len(cols["feature"])
        for k in cols:
            cols[k].append(None)
        if depth < max_depth and rng.random() < split_prob:
            f = int(rng.integers(len(schema)))
            spec = schema[f]
            cols["feature"][i] = f
            cols["value"][i] = 0.0
            if spec.is_categorical:
                k = int(rng.integers(1, spec.n_categories))
                cols["categories"][i] = sorted(rng.choice(spec.n_categories, k, replace=False).tolist())
                cols["threshold"][i] = 0.0
            else:
                cols["threshold"][i] = float(rng.integers(int(spec.low), int(spec.high))) + 0.5
            cols["left"][i] = node(depth + 1)
            cols["right"][i] = node(depth + 1)
            cols["cover"][i] = cols["cover"][cols["left"][i]] + cols["cover"][cols["right"][i]]
        else:
            cols["feature"][i] = -1
            cols["threshold"][i] = 0.0
            cols["left"][i] = cols["right"][i] = -1
            cols["value"][i] = float(rng.normal())
            cols["cover"][i] = float(rng.integers(1, 50)) * float(rng.choice([1.0, 0.37]))
        return i

    node(0)
    return Tree(**cols)


def random_ensemble(rng, n_features=6, n_trees=5, max_depth=4, n_categorical=1, schema=None):
    schema = schema or small_schema(n_features, n_categorical)
    trees = [random_tree(rng, schema, max_depth) for _ in range(n_trees)]
    return TreeEnsemble(trees, float(rng.normal()), schema)


def random_rows(rng, schema, n):
    X = np.zeros((n, len(schema)))
    for j, spec in enumerate(schema):
        if spec.is_categorical:
            X[:, j] = rng.integers(0, spec.n_categories, n)
        else:
            X[:, j] = rng.integers(int(spec.low), int(spec.high) + 1, n)
    return X


def random_survey(rng, n, schema=None, occupation_p=(0.6, 0.3, 0.1), integer_weights=False):
    """Schema-valid random survey data with independent labels."""
    schema = schema or default_schema()
    X = np.zeros((n, len(schema)))
    for j, spec in enumerate(schema):
        if spec.is_categorical:
            X[:, j] = rng.integers(0, spec.n_categories, n)
        elif spec.kind == BINARY:
            X[:, j] = rng.integers(0, 2, n)
        else:
            X[:, j] = rng.integers(int(spec.low), int(spec.high) + 1, n)
    caste = schema.caste_indices
    if caste is not None:
        X[:, caste] = 0
        X[np.arange(n), np.asarray(caste)[rng.integers(0, 4, n)]] = 1
    occ = rng.choice(3, size=n, p=occupation_p)
    w = rng.integers(1, 4, n).astype(float) if integer_weights else rng.lognormal(0, 0.5, n)
    return Dataset(schema, X, occ, w)
