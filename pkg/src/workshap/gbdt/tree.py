"""Decision trees, boosted ensembles and their JSON serialization."""

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import expit

from .. import _backend
from ..errors import PredictionError, SchemaError
from ..schema import FeatureSchema
from .params import Hyperparams

FORMAT_NAME = "workshap-gbdt"
FORMAT_VERSION = 1
MAX_CATEGORIES = 256
PROBA_EPS = 1e-15


class Tree:
    """One binary tree in flat array form.

    Node 0 is the root. Internal nodes send ``x`` left when
    ``x[feature] <= threshold`` (numeric/binary) or when ``x[feature]`` is
    in ``categories[node]`` (categorical). ``cover`` is the weighted count
    of training samples reaching each node.
    """

    def __init__(self, feature, threshold, left, right, value, cover, categories=None):
        self.feature = np.asarray(feature, dtype=np.int32)
        n = len(self.feature)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)
        self.cover = np.asarray(cover, dtype=np.float64)
        if categories is None:
            categories = [None] * n
        self.categories = [None if c is None else tuple(sorted(int(v) for v in c)) for c in categories]
        if n == 0 or any(len(a) != n for a in (self.threshold, self.left, self.right, self.value, self.cover)):
            raise ValueError("tree arrays must be non-empty and of equal length")
        for arr in (self.feature, self.threshold, self.left, self.right, self.value, self.cover):
            arr.setflags(write=False)

    @classmethod
    def leaf(cls, value, cover=1.0):
        return cls([-1], [0.0], [-1], [-1], [value], [cover])

    @property
    def n_nodes(self):
        return len(self.feature)

    def is_leaf(self, node):
        return self.feature[node] < 0

    @property
    def n_leaves(self):
        return int((self.feature < 0).sum())

    @cached_property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def features_used(self):
        return sorted({int(f) for f in self.feature if f >= 0})

    def goes_left(self, node, x):
        f = self.feature[node]
        cats = self.categories[node]
        if cats is not None:
            return int(x[f]) in cats
        return x[f] <= self.threshold[node]

    def leaf_for(self, x):
        node = 0
        while self.feature[node] >= 0:
            node = self.left[node] if self.goes_left(node, x) else self.right[node]
        return node

    def expected_value(self, node=0):
        """Cover-weighted mean output below ``node``."""
        if self.feature[node] < 0:
            return float(self.value[node])
        lft, rgt = self.left[node], self.right[node]
        return (
            self.cover[lft] * self.expected_value(lft) + self.cover[rgt] * self.expected_value(rgt)
        ) / self.cover[node]

    # -- serialization -------------------------------------------------------

    def to_dict(self, node=0):
        if self.feature[node] < 0:
            return {"value": float(self.value[node]), "cover": float(self.cover[node])}
        cats = self.categories[node]
        split = (
            {"categories": list(cats)}
            if cats is not None
            else {"threshold": float(self.threshold[node])}
        )
        return {
            "feature_index": int(self.feature[node]),
            "split": split,
            "cover": float(self.cover[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, d):
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "cover", "categories")}

        def add(node):
            i = len(cols["feature"])
            for k in cols:
                cols[k].append(None)
            cols["cover"][i] = float(node["cover"])
            if "feature_index" not in node:
                cols["feature"][i], cols["threshold"][i] = -1, 0.0
                cols["left"][i] = cols["right"][i] = -1
                cols["value"][i] = float(node["value"])
                return i
            cols["feature"][i] = int(node["feature_index"])
            cols["value"][i] = 0.0
            split = node["split"]
            if "categories" in split:
                cols["categories"][i] = split["categories"]
                cols["threshold"][i] = 0.0
            else:
                cols["threshold"][i] = float(split["threshold"])
            cols["left"][i] = add(node["left"])
            cols["right"][i] = add(node["right"])
            return i

        add(d)
        return cls(**cols)

    def __eq__(self, other):
        return (
            isinstance(other, Tree)
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("feature", "threshold", "left", "right", "value", "cover")
            )
            and self.categories == other.categories
        )


@dataclass(frozen=True)
class FlatEnsemble:
    """All trees concatenated into kernel-ready arrays."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    is_cat: np.ndarray
    cat_bits: np.ndarray
    roots: np.ndarray
    max_depth: int
    tree_feat_ptr: np.ndarray
    tree_feat_idx: np.ndarray

    @property
    def node_arrays(self):
        return (self.feature, self.threshold, self.left, self.right, self.value,
                self.cover, self.is_cat, self.cat_bits)


def flatten(trees):
    feature, threshold, left, right, value, cover, is_cat, bits = [], [], [], [], [], [], [], []
    roots, ptr, idx = [], [0], []
    offset = 0
    for tree in trees:
        n = tree.n_nodes
        roots.append(offset)
        internal = tree.feature >= 0
        feature.append(tree.feature)
        threshold.append(tree.threshold)
        left.append(np.where(internal, tree.left + offset, -1))
        right.append(np.where(internal, tree.right + offset, -1))
        value.append(tree.value)
        cover.append(tree.cover)
        tb = np.zeros((n, MAX_CATEGORIES // 64), dtype=np.uint64)
        cat = np.zeros(n, dtype=np.uint8)
        for node, cats in enumerate(tree.categories):
            if cats is not None:
                cat[node] = 1
                for c in cats:
                    tb[node, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
        is_cat.append(cat)
        bits.append(tb)
        used = tree.features_used()
        idx.extend(used)
        ptr.append(len(idx))
        offset += n

    def cat_(parts, dtype, shape=(0,)):
        return np.ascontiguousarray(np.concatenate(parts) if parts else np.zeros(shape), dtype=dtype)

    return FlatEnsemble(
        feature=cat_(feature, np.int32),
        threshold=cat_(threshold, np.float64),
        left=cat_(left, np.int32),
        right=cat_(right, np.int32),
        value=cat_(value, np.float64),
        cover=cat_(cover, np.float64),
        is_cat=cat_(is_cat, np.uint8),
        cat_bits=cat_(bits, np.uint64, (0, MAX_CATEGORIES // 64)),
        roots=np.asarray(roots, dtype=np.int32),
        max_depth=max((t.depth for t in trees), default=0),
        tree_feat_ptr=np.asarray(ptr, dtype=np.int32),
        tree_feat_idx=np.asarray(idx, dtype=np.int32),
    )


class TreeEnsemble:
    """Additive log-odds model: ``margin(x) = base_score + sum_t tree_t(x)``."""

    def __init__(self, trees, base_score, schema, hyperparams=None, train_loss=None):
        self.trees = tuple(trees)
        self.base_score = float(base_score)
        self.schema = schema
        self.hyperparams = hyperparams
        self.train_loss = None if train_loss is None else tuple(float(v) for v in train_loss)
        for tree in self.trees:
            if tree.feature.max(initial=-1) >= len(schema):
                raise SchemaError("tree references a feature outside the schema")

    def __len__(self):
        return len(self.trees)

    def __eq__(self, other):
        return (
            isinstance(other, TreeEnsemble)
            and self.base_score == other.base_score
            and self.schema == other.schema
            and self.trees == other.trees
        )

    def __repr__(self):
        return f"TreeEnsemble({len(self.trees)} trees, base_score={self.base_score:.6g})"

    @cached_property
    def flat(self):
        return flatten(self.trees)

    @property
    def n_features(self):
        return len(self.schema)

    def expected_value(self):
        """Cover-weighted expectation of the margin (the SHAP base value)."""
        return self.base_score + sum(t.expected_value() for t in self.trees)

    def check_input(self, X):
        X = np.array(X, dtype=np.float64, ndmin=2)
        if X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} features, got {X.shape[1]}")
        if not np.isfinite(X).all():
            raise PredictionError("non-finite feature value")
        for j, spec in enumerate(self.schema):
            if spec.is_categorical:
                col = X[:, j]
                bad = (col < 0) | (col >= spec.n_categories) | (col != np.round(col))
                if bad.any():
                    row = int(np.flatnonzero(bad)[0])
                    raise PredictionError(
                        f"row {row}: {spec.name} code {col[row]!r} outside 0..{spec.n_categories - 1}"
                    )
        return np.ascontiguousarray(X)

    def predict_margin(self, X):
        """Margins for a batch (2-D) or a single vector (1-D, returns float)."""
        single = np.ndim(X) == 1
        out = _backend.predict_margin(self.flat, self.base_score, self.check_input(X))
        return float(out[0]) if single else out

    def predict_proba(self, X):
        p = expit(self.predict_margin(X))
        return np.clip(p, PROBA_EPS, 1.0 - PROBA_EPS)

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        d = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "base_score": self.base_score,
            "schema": self.schema.to_dict(),
            "hyperparams": None if self.hyperparams is None else self.hyperparams.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }
        if self.train_loss is not None:
            d["train_loss"] = list(self.train_loss)
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise SchemaError(f"not a {FORMAT_NAME} document")
        if d.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model version {d.get('version')!r}")
        hp = d.get("hyperparams")
        return cls(
            [Tree.from_dict(t) for t in d["trees"]],
            d["base_score"],
            FeatureSchema.from_dict(d["schema"]),
            None if hp is None else Hyperparams.from_dict(hp),
            d.get("train_loss"),
        )

    def to_json(self, path):
        # json writes floats with repr(), the shortest exact round-trip form
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict_margin(model, x):
    """``model.predict_margin`` as a function."""
    return model.predict_margin(x)


def predict_proba(model, x):
    """Sigmoid of the margin, clamped to ``[eps, 1 - eps]``."""
    return model.predict_proba(x)
