"""Weighted logistic gradient boosting with leaf-wise histogram trees."""

import heapq
import logging

import numpy as np
from scipy.special import expit, logit

from .. import _backend
from ..dataset import check_experiment
from ..errors import TrainingError
from .binning import BinMapper
from .params import Hyperparams
from .tree import Tree, TreeEnsemble

log = logging.getLogger(__name__)

# Per-unit gradients and hessians are rounded to multiples of 2**-30. With
# integer weights every histogram sum is then exact, hence independent of
# accumulation order and of how weight is split across duplicate rows.
_GRID = 2.0**30


def split_gain(g_left, h_left, g_right, h_right, l2_lambda):
    """Loss reduction of a split under a second-order expansion."""
    g = g_left + g_right
    h = h_left + h_right
    return 0.5 * (
        g_left * g_left / (h_left + l2_lambda)
        + g_right * g_right / (h_right + l2_lambda)
        - g * g / (h + l2_lambda)
    )


def leaf_value(g, h, l2_lambda, learning_rate):
    return -learning_rate * g / (h + l2_lambda)


def weighted_log_loss(margin, y, w):
    """Weighted mean binary cross-entropy of log-odds ``margin``."""
    loss = np.logaddexp(0.0, margin) - y * margin
    return float(np.dot(w, loss) / w.sum())


def gradients(margin, y, w):
    p = expit(margin)
    unit_g = np.rint((p - y) * _GRID) / _GRID
    unit_h = np.rint(p * (1.0 - p) * _GRID) / _GRID
    return w * unit_g, w * unit_h


class _Node:
    __slots__ = ("index", "rows", "hist", "g", "h", "w", "split")

    def __init__(self, index, rows, hist):
        self.index = index
        self.rows = rows
        self.hist = hist
        totals = hist[0].sum(axis=0)
        self.g, self.h, self.w = float(totals[0]), float(totals[1]), float(totals[2])
        self.split = None


class _Split:
    __slots__ = ("gain", "feature", "bin", "categories")

    def __init__(self, gain, feature, bin_index=None, categories=None):
        self.gain = gain
        self.feature = feature
        self.bin = bin_index
        self.categories = categories


def _best_split(node, n_bins, categorical, hp):
    """Highest-gain split of ``node``; ties resolve to the lowest feature, then bin."""
    lam = hp.l2_lambda
    msl = hp.min_samples_leaf
    hist = node.hist
    best = None

    cum = np.cumsum(hist, axis=1)
    gl, hl, wl = cum[:, :, 0], cum[:, :, 1], cum[:, :, 2]
    gains = split_gain(gl, hl, node.g - gl, node.h - hl, lam)
    valid = (wl >= msl) & (node.w - wl >= msl)
    valid &= np.arange(hist.shape[1])[None, :] < (n_bins - 1)[:, None]

    for f in range(hist.shape[0]):
        if categorical[f]:
            cand = _categorical_split(hist[f, : n_bins[f]], node, f, hp)
        else:
            ok = np.flatnonzero(valid[f])
            if len(ok) == 0:
                continue
            b = ok[np.argmax(gains[f, ok])]
            cand = _Split(float(gains[f, b]), f, bin_index=int(b))
        if cand is not None and cand.gain > 0 and (best is None or cand.gain > best.gain):
            best = cand
    return best


def _categorical_split(hist, node, f, hp):
    """Sort present categories by G/(H+lambda) and scan prefixes as left sets."""
    present = np.flatnonzero(hist[:, 2] > 0)
    if len(present) < 2:
        return None
    ratio = hist[present, 0] / (hist[present, 1] + hp.l2_lambda)
    order = present[np.argsort(ratio, kind="stable")]
    cum = np.cumsum(hist[order], axis=0)[:-1]
    gl, hl, wl = cum[:, 0], cum[:, 1], cum[:, 2]
    ok = np.flatnonzero((wl >= hp.min_samples_leaf) & (node.w - wl >= hp.min_samples_leaf))
    if len(ok) == 0:
        return None
    gains = split_gain(gl[ok], hl[ok], node.g - gl[ok], node.h - hl[ok], hp.l2_lambda)
    k = int(ok[np.argmax(gains)])
    return _Split(float(gains.max()), f, categories=tuple(sorted(int(c) for c in order[: k + 1])))


def _grow_tree(binned, mapper, n_bins, categorical, grad, hess, weight, hp):
    """Grow one tree best-first; returns the tree and (rows, value) per leaf."""
    n_features = binned.shape[1]
    width = int(n_bins.max())

    def histogram(rows):
        out = np.empty((n_features, width, 3))
        _backend.build_histogram(binned, rows, grad, hess, weight, out)
        return out

    root_rows = np.arange(binned.shape[0], dtype=np.intp)
    nodes = [_Node(0, root_rows, histogram(root_rows))]
    children = {}
    heap = []

    def consider(node):
        node.split = _best_split(node, n_bins, categorical, hp)
        if node.split is not None:
            heapq.heappush(heap, (-node.split.gain, node.index))

    consider(nodes[0])
    n_leaves = 1
    while heap and n_leaves < hp.max_leaves:
        _, idx = heapq.heappop(heap)
        node = nodes[idx]
        s = node.split
        codes = binned[node.rows, s.feature]
        if s.categories is None:
            go_left = codes <= s.bin
        else:
            lookup = np.zeros(256, dtype=bool)
            lookup[list(s.categories)] = True
            go_left = lookup[codes]
        rows_l, rows_r = node.rows[go_left], node.rows[~go_left]
        small, large = (rows_l, rows_r) if len(rows_l) <= len(rows_r) else (rows_r, rows_l)
        hist_small = histogram(small)
        hist_large = node.hist - hist_small
        hl, hr = (hist_small, hist_large) if small is rows_l else (hist_large, hist_small)
        left = _Node(len(nodes), rows_l, hl)
        right = _Node(len(nodes) + 1, rows_r, hr)
        nodes.extend([left, right])
        children[idx] = (left.index, right.index)
        node.hist = None
        consider(left)
        consider(right)
        n_leaves += 1

    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int32)
    threshold = np.zeros(n)
    lft = np.full(n, -1, dtype=np.int32)
    rgt = np.full(n, -1, dtype=np.int32)
    value = np.zeros(n)
    cover = np.zeros(n)
    categories = [None] * n
    leaves = []
    for node in reversed(nodes):
        i = node.index
        if i in children:
            s = node.split
            feature[i] = s.feature
            lft[i], rgt[i] = children[i]
            if s.categories is None:
                threshold[i] = mapper.threshold(s.feature, s.bin)
            else:
                categories[i] = s.categories
            # parent cover is the exact sum of its children's covers
            cover[i] = cover[lft[i]] + cover[rgt[i]]
        else:
            value[i] = leaf_value(node.g, node.h, hp.l2_lambda, hp.learning_rate)
            cover[i] = weight[node.rows].sum()
            leaves.append((node.rows, value[i]))
    tree = Tree(feature, threshold, lft, rgt, value, cover, categories)
    # renumber nodes in pre-order, the order serialization uses
    return Tree.from_dict(tree.to_dict()), leaves


def fit(X, y, w, schema, hp=Hyperparams()):
    """Train on raw arrays; see :func:`train`."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if len(y) == 0:
        raise TrainingError("no training samples")
    pos = float(w[y == 1].sum())
    total = float(w.sum())
    if pos <= 0 or pos >= total:
        raise TrainingError("training data must contain both classes")
    base_score = float(logit(pos / total))

    mapper = BinMapper(schema, hp.max_bins).fit(X, w)
    binned = mapper.transform(X)
    n_bins = mapper.n_bins
    categorical = np.array(schema.categorical_mask)

    margin = np.full(len(y), base_score)
    losses = [weighted_log_loss(margin, y, w)]
    trees = []
    for _ in range(hp.num_trees):
        grad, hess = gradients(margin, y, w)
        tree, leaves = _grow_tree(binned, mapper, n_bins, categorical, grad, hess, w, hp)
        for rows, v in leaves:
            margin[rows] += v
        trees.append(tree)
        losses.append(weighted_log_loss(margin, y, w))
    log.debug("trained %d trees, final loss %.6f", len(trees), losses[-1])
    return TreeEnsemble(trees, base_score, schema, hp, losses)


def train(ds, experiment, hp=Hyperparams(), seed=0):
    """Fit a boosted ensemble to one experiment's labels.

    Training is deterministic (no row or feature subsampling); ``seed`` is
    accepted for interface symmetry with the sampling stages.
    """
    check_experiment(experiment)
    return fit(ds.X, ds.labels(experiment), ds.weights, ds.schema, hp)
