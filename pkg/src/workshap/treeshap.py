"""Exact Shapley attributions for tree ensembles.

The value of a coalition ``S`` is the path-dependent conditional
expectation of the margin: splits on features in ``S`` follow ``x``, all
other splits average their children by training cover. The fast path is
polynomial-time TreeSHAP (compiled kernel or Python fallback); the
exponential-time enumeration here exists to check it.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .dataset import Dataset
from .errors import OracleLimitError, SchemaError

SHAP_ORACLE_MAX_FEATURES = 15
INTERACTION_ORACLE_MAX_FEATURES = 12


# -- coalition values ------------------------------------------------------------


def _tree_conditional(tree, x, members, node=0):
    if tree.feature[node] < 0:
        return float(tree.value[node])
    lft, rgt = int(tree.left[node]), int(tree.right[node])
    if int(tree.feature[node]) in members:
        return _tree_conditional(tree, x, members, lft if tree.goes_left(node, x) else rgt)
    return (
        tree.cover[lft] * _tree_conditional(tree, x, members, lft)
        + tree.cover[rgt] * _tree_conditional(tree, x, members, rgt)
    ) / tree.cover[node]


def conditional_expectation(model, x, subset):
    """Expected margin given the features in ``subset`` take their values in ``x``."""
    members = {int(j) for j in subset}
    x = np.asarray(x, dtype=np.float64)
    return model.base_score + sum(_tree_conditional(t, x, members) for t in model.trees)


def _tree_all_coalitions(tree, x, masks, node=0):
    if tree.feature[node] < 0:
        return np.full(len(masks), float(tree.value[node]))
    f = int(tree.feature[node])
    lft, rgt = int(tree.left[node]), int(tree.right[node])
    v_l = _tree_all_coalitions(tree, x, masks, lft)
    v_r = _tree_all_coalitions(tree, x, masks, rgt)
    followed = v_l if tree.goes_left(node, x) else v_r
    averaged = (tree.cover[lft] * v_l + tree.cover[rgt] * v_r) / tree.cover[node]
    return np.where((masks >> f) & 1 == 1, followed, averaged)


def coalition_values(model, x):
    """``conditional_expectation`` for every subset, indexed by bitmask."""
    m = model.n_features
    masks = np.arange(1 << m, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    v = np.full(len(masks), model.base_score)
    for tree in model.trees:
        v = v + _tree_all_coalitions(tree, x, masks)
    return v


def _popcount(masks):
    return np.array([bin(int(s)).count("1") for s in masks], dtype=np.int64)


def shap_brute_force(model, x):
    """Shapley values by enumerating all coalitions.

    Returns
    -------
    phi : ndarray of shape (n_features,)
    base : float
        ``v(empty set)``.
    """
    m = model.n_features
    if m > SHAP_ORACLE_MAX_FEATURES:
        raise OracleLimitError(f"{m} features exceeds the oracle cap of {SHAP_ORACLE_MAX_FEATURES}")
    v = coalition_values(model, x)
    masks = np.arange(1 << m, dtype=np.int64)
    size = _popcount(masks)
    fact = [math.factorial(k) for k in range(m + 1)]
    weight = np.array([fact[s] * fact[m - s - 1] / fact[m] if s < m else 0.0 for s in range(m + 1)])
    phi = np.zeros(m)
    for j in range(m):
        without = masks[(masks >> j) & 1 == 0]
        phi[j] = np.sum(weight[size[without]] * (v[without | (1 << j)] - v[without]))
    return phi, float(v[0])


def interaction_brute_force(model, x):
    """Pairwise Shapley interaction values by enumeration.

    Off-diagonal entries use the Shapley interaction index split evenly
    between ``(j, k)`` and ``(k, j)``; the diagonal holds the main effect
    ``phi_j - sum_{k != j} Phi_jk``.
    """
    m = model.n_features
    if m > INTERACTION_ORACLE_MAX_FEATURES:
        raise OracleLimitError(
            f"{m} features exceeds the interaction oracle cap of {INTERACTION_ORACLE_MAX_FEATURES}"
        )
    phi, _ = shap_brute_force(model, x)
    v = coalition_values(model, x)
    masks = np.arange(1 << m, dtype=np.int64)
    size = _popcount(masks)
    fact = [math.factorial(k) for k in range(m + 1)]
    out = np.zeros((m, m))
    if m >= 2:
        weight = np.array(
            [fact[s] * fact[m - s - 2] / (2 * fact[m - 1]) if s <= m - 2 else 0.0 for s in range(m + 1)]
        )
        for j in range(m):
            for k in range(j + 1, m):
                bj, bk = 1 << j, 1 << k
                rest = masks[(masks & (bj | bk)) == 0]
                delta = v[rest | bj | bk] - v[rest | bj] - v[rest | bk] + v[rest]
                out[j, k] = out[k, j] = np.sum(weight[size[rest]] * delta)
    for j in range(m):
        out[j, j] = phi[j] - (out[j].sum() - out[j, j])
    return out


# -- attribution containers --------------------------------------------------------


def _check_ids(sample_ids, n):
    ids = np.arange(n, dtype=np.int64) if sample_ids is None else np.asarray(sample_ids, dtype=np.int64)
    if len(ids) != n:
        raise ValueError("sample_ids length does not match values")
    return ids


def _fmt(v):
    return repr(float(v))


@dataclass
class ShapMatrix:
    """Per-sample SHAP values in log-odds units."""

    values: np.ndarray
    base_value: float
    sample_ids: np.ndarray
    feature_names: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.sample_ids = _check_ids(self.sample_ids, self.values.shape[0])
        self.feature_names = list(self.feature_names)

    @property
    def n_samples(self):
        return self.values.shape[0]

    def feature_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def column(self, name):
        return self.values[:, self.feature_index(name)]

    def reconstruction(self):
        return self.base_value + self.values.sum(axis=1)

    def local_accuracy_error(self, margins):
        """Largest relative gap between base + sum(phi) and the margins."""
        margins = np.asarray(margins)
        return float(np.max(np.abs(self.reconstruction() - margins) / np.maximum(1.0, np.abs(margins))))

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "feature", "value"])
            for i, sid in enumerate(self.sample_ids):
                for j, name in enumerate(self.feature_names):
                    w.writerow([int(sid), name, _fmt(self.values[i, j])])

    def save(self, stem):
        _save_binary(stem, "shap_matrix", self.values, self)

    @classmethod
    def load(cls, stem):
        meta, values, ids = _load_binary(stem, "shap_matrix")
        return cls(values, meta["base_value"], ids, meta["feature_names"])


@dataclass
class InteractionTensor:
    """Per-sample symmetric SHAP interaction matrices; diagonal = main effects."""

    values: np.ndarray
    base_value: float
    sample_ids: np.ndarray
    feature_names: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.sample_ids = _check_ids(self.sample_ids, self.values.shape[0])
        self.feature_names = list(self.feature_names)

    @property
    def n_samples(self):
        return self.values.shape[0]

    def feature_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def shap_values(self):
        return ShapMatrix(self.values.sum(axis=2), self.base_value, self.sample_ids, self.feature_names)

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "feature", "feature_2", "value"])
            for i, sid in enumerate(self.sample_ids):
                for j, a in enumerate(self.feature_names):
                    for k, b in enumerate(self.feature_names):
                        w.writerow([int(sid), a, b, _fmt(self.values[i, j, k])])

    def save(self, stem):
        _save_binary(stem, "interaction_tensor", self.values, self)

    @classmethod
    def load(cls, stem):
        meta, values, ids = _load_binary(stem, "interaction_tensor")
        return cls(values, meta["base_value"], ids, meta["feature_names"])


def _save_binary(stem, kind, values, obj):
    """Column-major ``.npy`` dumps plus a JSON sidecar describing them."""
    stem = Path(stem)
    values_file = stem.with_name(stem.name + ".values.npy")
    ids_file = stem.with_name(stem.name + ".ids.npy")
    np.save(values_file, np.asfortranarray(values))
    np.save(ids_file, obj.sample_ids)
    meta = {
        "kind": kind,
        "shape": list(values.shape),
        "dtype": "<f8",
        "order": "column-major",
        "base_value": float(obj.base_value),
        "feature_names": obj.feature_names,
        "values_file": values_file.name,
        "ids_file": ids_file.name,
    }
    stem.with_name(stem.name + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def _load_binary(stem, kind):
    stem = Path(stem)
    sidecar = stem.with_name(stem.name + ".json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing attribution sidecar {sidecar}")
    meta = json.loads(sidecar.read_text())
    if meta.get("kind") != kind:
        raise SchemaError(f"{sidecar} holds {meta.get('kind')!r}, expected {kind!r}")
    values = np.load(sidecar.with_name(meta["values_file"]))
    ids = np.load(sidecar.with_name(meta["ids_file"]))
    if list(values.shape) != meta["shape"]:
        raise SchemaError(f"{sidecar}: shape mismatch")
    return meta, np.ascontiguousarray(values), ids


# -- fast attribution ----------------------------------------------------------------


def _features_and_ids(model, data):
    if isinstance(data, Dataset):
        if data.schema != model.schema:
            raise SchemaError("dataset schema does not match the model schema")
        return model.check_input(data.X), data.sample_ids
    return model.check_input(data), None


def shap_values(model, data, n_threads=None):
    """SHAP values for every row of ``data`` (a Dataset or a feature matrix)."""
    X, ids = _features_and_ids(model, data)
    values = _backend.tree_shap(model.flat, X, n_threads)
    return ShapMatrix(values, model.expected_value(), ids, model.schema.names)


def interaction_values(model, data, n_threads=None):
    """SHAP interaction tensors for every row of ``data``."""
    X, ids = _features_and_ids(model, data)
    values = _backend.tree_shap_interactions(model.flat, X, n_threads)
    return InteractionTensor(values, model.expected_value(), ids, model.schema.names)


def main_effects(tensor):
    """Diagonal of each interaction matrix, shape (n_samples, n_features)."""
    return np.diagonal(tensor.values, axis1=1, axis2=2).copy()
