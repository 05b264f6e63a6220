"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Signatures and floating-point operation order match the compiled versions
so both backends produce bit-identical results.
"""

import numpy as np


def build_histogram(binned, rows, grad, hess, weight, out):
    out[:] = 0.0
    n_bins = out.shape[1]
    g, h, w = grad[rows], hess[rows], weight[rows]
    for f in range(binned.shape[1]):
        b = binned[rows, f]
        out[f, :, 0] = np.bincount(b, weights=g, minlength=n_bins)
        out[f, :, 1] = np.bincount(b, weights=h, minlength=n_bins)
        out[f, :, 2] = np.bincount(b, weights=w, minlength=n_bins)


def _goes_left(feature, threshold, is_cat, cat_bits, node, x):
    f = feature[node]
    if is_cat[node]:
        c = int(x[f])
        return bool((cat_bits[node][c >> 6] >> (c & 63)) & 1)
    return x[f] <= threshold[node]


def predict_margin(feature, threshold, left, right, value, cover, is_cat, cat_bits,
                   roots, base_score, X, out):
    n = X.shape[0]
    rows = np.arange(n)
    out[:] = base_score
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[active]
            f = feature[nd]
            xv = X[r, f]
            go = xv <= threshold[nd]
            cat = is_cat[nd].astype(bool)
            if cat.any():
                c = xv[cat].astype(np.int64)
                bits = cat_bits[nd[cat], c >> 6]
                go[cat] = ((bits >> (c & 63).astype(np.uint64)) & np.uint64(1)).astype(bool)
            node[active] = np.where(go, left[nd], right[nd])
            active = feature[node] >= 0
        out += value[node]


# -- TreeSHAP ------------------------------------------------------------------
# A path element is the list [feature, zero_fraction, one_fraction, pweight].


def _extend(path, depth, zero, one, feature):
    while len(path) <= depth:
        path.append([0, 0.0, 0.0, 0.0])
    path[depth] = [feature, zero, one, 1.0 if depth == 0 else 0.0]
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += one * path[i][3] * (i + 1) / (depth + 1)
        path[i][3] = zero * path[i][3] * (depth - i) / (depth + 1)


def _unwind(path, depth, idx):
    one, zero = path[idx][2], path[idx][1]
    next_one = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = path[i][3]
            path[i][3] = next_one * (depth + 1) / ((i + 1) * one)
            next_one = tmp - path[i][3] * zero * (depth - i) / (depth + 1)
        else:
            path[i][3] = path[i][3] * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        path[i][0], path[i][1], path[i][2] = path[i + 1][0], path[i + 1][1], path[i + 1][2]


def _unwound_sum(path, depth, idx):
    one, zero = path[idx][2], path[idx][1]
    next_one = path[depth][3]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = next_one * (depth + 1) / ((i + 1) * one)
            total += tmp
            next_one = path[i][3] - tmp * zero * (depth - i) / (depth + 1)
        else:
            total += (path[i][3] / zero) / ((depth - i) / (depth + 1))
    return total


def _recurse(tree, x, phi, node, parent_path, depth, parent_zero, parent_one,
             parent_feature, condition, condition_feature, condition_fraction):
    feature, threshold, left, right, value, cover, is_cat, cat_bits = tree
    if condition_fraction == 0:
        return
    path = [el[:] for el in parent_path[: depth + 1]]
    if condition == 0 or condition_feature != parent_feature:
        _extend(path, depth, parent_zero, parent_one, parent_feature)
    split = feature[node]
    if split < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(path, depth, i)
            scale = w * (path[i][2] - path[i][1]) * condition_fraction
            phi[path[i][0]] += scale * value[node]
        return

    if _goes_left(feature, threshold, is_cat, cat_bits, node, x):
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    in_zero = in_one = 1.0

    path_index = next((k for k in range(depth + 1) if path[k][0] == split), depth + 1)
    if path_index != depth + 1:
        in_zero, in_one = path[path_index][1], path[path_index][2]
        _unwind(path, depth, path_index)
        depth -= 1

    hot_cf = cold_cf = condition_fraction
    if condition > 0 and split == condition_feature:
        cold_cf = 0.0
        depth -= 1
    elif condition < 0 and split == condition_feature:
        hot_cf *= hot_zero
        cold_cf *= cold_zero
        depth -= 1

    _recurse(tree, x, phi, hot, path, depth + 1, hot_zero * in_zero, in_one,
             split, condition, condition_feature, hot_cf)
    _recurse(tree, x, phi, cold, path, depth + 1, cold_zero * in_zero, 0.0,
             split, condition, condition_feature, cold_cf)


def _as_lists(feature, threshold, left, right, value, cover, is_cat, cat_bits):
    return (feature.tolist(), threshold.tolist(), left.tolist(), right.tolist(),
            value.tolist(), cover.tolist(), is_cat.tolist(), cat_bits.tolist())


def tree_shap(feature, threshold, left, right, value, cover, is_cat, cat_bits,
              roots, max_depth, X, out, start, stop):
    tree = _as_lists(feature, threshold, left, right, value, cover, is_cat, cat_bits)
    n_features = X.shape[1]
    for i in range(start, stop):
        x = X[i].tolist()
        phi = [0.0] * n_features
        for root in roots.tolist():
            _recurse(tree, x, phi, root, [], 0, 1.0, 1.0, -1, 0, 0, 1.0)
        out[i] += phi


def tree_shap_interactions(feature, threshold, left, right, value, cover, is_cat,
                           cat_bits, roots, max_depth, tree_feat_ptr, tree_feat_idx,
                           X, out, start, stop):
    tree = _as_lists(feature, threshold, left, right, value, cover, is_cat, cat_bits)
    n_features = X.shape[1]
    roots = roots.tolist()
    ptr, idx = tree_feat_ptr.tolist(), tree_feat_idx.tolist()
    for i in range(start, stop):
        x = X[i].tolist()
        phi = [0.0] * n_features
        for root in roots:
            _recurse(tree, x, phi, root, [], 0, 1.0, 1.0, -1, 0, 0, 1.0)
        acc = [[0.0] * n_features for _ in range(n_features)]
        for t, root in enumerate(roots):
            for j in idx[ptr[t]:ptr[t + 1]]:
                on = [0.0] * n_features
                off = [0.0] * n_features
                _recurse(tree, x, on, root, [], 0, 1.0, 1.0, -1, 1, j, 1.0)
                _recurse(tree, x, off, root, [], 0, 1.0, 1.0, -1, -1, j, 1.0)
                row = acc[j]
                for k in range(n_features):
                    row[k] += (on[k] - off[k]) / 2.0
        for j in range(n_features):
            s = 0.0
            for k in range(n_features):
                if k != j:
                    v = (acc[j][k] + acc[k][j]) / 2.0
                    out[i, j, k] = v
                    s += v
            out[i, j, j] = phi[j] - s
