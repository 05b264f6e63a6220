# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: histogram accumulation, ensemble routing, TreeSHAP.

Every function here has a pure-Python twin in ``_fallback.py`` with the
same signature and the same floating-point operation order.
"""

import numpy as np

from libc.stdlib cimport malloc, free
from libc.string cimport memset

ctypedef Py_ssize_t intp


cdef struct PathElement:
    int feature
    double zero_fraction
    double one_fraction
    double pweight


cdef struct Ens:
    const int* feature
    const double* threshold
    const int* left
    const int* right
    const double* value
    const double* cover
    const unsigned char* is_cat
    const unsigned long long* cat_bits


def build_histogram(const unsigned char[:, ::1] binned, const intp[::1] rows,
                    const double[::1] grad, const double[::1] hess,
                    const double[::1] weight, double[:, :, ::1] out):
    """Accumulate (gradient, hessian, weight) per (feature, bin) over ``rows``."""
    cdef intp i, r, f
    cdef intp n_features = binned.shape[1]
    cdef unsigned char b
    out[:, :, :] = 0.0
    with nogil:
        for i in range(rows.shape[0]):
            r = rows[i]
            for f in range(n_features):
                b = binned[r, f]
                out[f, b, 0] += grad[r]
                out[f, b, 1] += hess[r]
                out[f, b, 2] += weight[r]


cdef inline bint goes_left(const Ens* e, int node, const double* x) nogil:
    cdef int f = e.feature[node]
    cdef long long c
    if e.is_cat[node]:
        c = <long long>x[f]
        return (e.cat_bits[4 * node + (c >> 6)] >> (c & 63)) & 1
    return x[f] <= e.threshold[node]


cdef inline void _bind(Ens* e, const int[::1] feature, const double[::1] threshold,
                       const int[::1] left, const int[::1] right,
                       const double[::1] value, const double[::1] cover,
                       const unsigned char[::1] is_cat,
                       const unsigned long long[:, ::1] cat_bits):
    e.feature = &feature[0]
    e.threshold = &threshold[0]
    e.left = &left[0]
    e.right = &right[0]
    e.value = &value[0]
    e.cover = &cover[0]
    e.is_cat = &is_cat[0]
    e.cat_bits = &cat_bits[0, 0]


def predict_margin(const int[::1] feature, const double[::1] threshold,
                   const int[::1] left, const int[::1] right,
                   const double[::1] value, const double[::1] cover,
                   const unsigned char[::1] is_cat,
                   const unsigned long long[:, ::1] cat_bits,
                   const int[::1] roots, double base_score,
                   const double[:, ::1] X, double[::1] out):
    """``out[i] = base_score + sum_t leaf_t(X[i])``, trees added in order."""
    cdef Ens e
    cdef intp i, t
    cdef int node
    cdef double s
    _bind(&e, feature, threshold, left, right, value, cover, is_cat, cat_bits)
    with nogil:
        for i in range(X.shape[0]):
            s = base_score
            for t in range(roots.shape[0]):
                node = roots[t]
                while e.feature[node] >= 0:
                    if goes_left(&e, node, &X[i, 0]):
                        node = e.left[node]
                    else:
                        node = e.right[node]
                s = s + e.value[node]
            out[i] = s


# -- TreeSHAP ------------------------------------------------------------------


cdef void extend_path(PathElement* path, int depth, double zero_fraction,
                      double one_fraction, int feature) noexcept nogil:
    cdef int i
    path[depth].feature = feature
    path[depth].zero_fraction = zero_fraction
    path[depth].one_fraction = one_fraction
    path[depth].pweight = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / <double>(depth + 1)
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / <double>(depth + 1)


cdef void unwind_path(PathElement* path, int depth, int idx) noexcept nogil:
    cdef double one = path[idx].one_fraction
    cdef double zero = path[idx].zero_fraction
    cdef double next_one = path[depth].pweight
    cdef double tmp
    cdef int i
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = path[i].pweight
            path[i].pweight = next_one * (depth + 1) / ((i + 1) * one)
            next_one = tmp - path[i].pweight * zero * (depth - i) / <double>(depth + 1)
        else:
            path[i].pweight = path[i].pweight * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        path[i].feature = path[i + 1].feature
        path[i].zero_fraction = path[i + 1].zero_fraction
        path[i].one_fraction = path[i + 1].one_fraction


cdef double unwound_path_sum(const PathElement* path, int depth, int idx) noexcept nogil:
    cdef double one = path[idx].one_fraction
    cdef double zero = path[idx].zero_fraction
    cdef double next_one = path[depth].pweight
    cdef double total = 0.0
    cdef double tmp
    cdef int i
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = next_one * (depth + 1) / ((i + 1) * one)
            total += tmp
            next_one = path[i].pweight - tmp * zero * (depth - i) / <double>(depth + 1)
        else:
            total += (path[i].pweight / zero) / ((depth - i) / <double>(depth + 1))
    return total


cdef void shap_recurse(const Ens* e, const double* x, double* phi, int node,
                       PathElement* parent_path, int depth,
                       double parent_zero, double parent_one, int parent_feature,
                       int condition, int condition_feature,
                       double condition_fraction) noexcept nogil:
    cdef PathElement* path
    cdef int i, split, hot, cold, path_index
    cdef double w, scale, hot_zero, cold_zero, in_zero, in_one
    cdef double hot_cf, cold_cf
    if condition_fraction == 0:
        return
    path = parent_path + depth + 1
    for i in range(depth + 1):
        path[i] = parent_path[i]
    if condition == 0 or condition_feature != parent_feature:
        extend_path(path, depth, parent_zero, parent_one, parent_feature)
    split = e.feature[node]
    if split < 0:
        for i in range(1, depth + 1):
            w = unwound_path_sum(path, depth, i)
            scale = w * (path[i].one_fraction - path[i].zero_fraction) * condition_fraction
            phi[path[i].feature] += scale * e.value[node]
        return

    if goes_left(e, node, x):
        hot = e.left[node]
        cold = e.right[node]
    else:
        hot = e.right[node]
        cold = e.left[node]
    w = e.cover[node]
    hot_zero = e.cover[hot] / w
    cold_zero = e.cover[cold] / w
    in_zero = 1.0
    in_one = 1.0

    path_index = 0
    while path_index <= depth:
        if path[path_index].feature == split:
            break
        path_index += 1
    if path_index != depth + 1:
        in_zero = path[path_index].zero_fraction
        in_one = path[path_index].one_fraction
        unwind_path(path, depth, path_index)
        depth -= 1

    hot_cf = condition_fraction
    cold_cf = condition_fraction
    if condition > 0 and split == condition_feature:
        cold_cf = 0.0
        depth -= 1
    elif condition < 0 and split == condition_feature:
        hot_cf *= hot_zero
        cold_cf *= cold_zero
        depth -= 1

    shap_recurse(e, x, phi, hot, path, depth + 1, hot_zero * in_zero, in_one,
                 split, condition, condition_feature, hot_cf)
    shap_recurse(e, x, phi, cold, path, depth + 1, cold_zero * in_zero, 0.0,
                 split, condition, condition_feature, cold_cf)


cdef inline intp _path_size(int max_depth) nogil:
    return (max_depth + 2) * (max_depth + 3) // 2 + 8


def tree_shap(const int[::1] feature, const double[::1] threshold,
              const int[::1] left, const int[::1] right,
              const double[::1] value, const double[::1] cover,
              const unsigned char[::1] is_cat,
              const unsigned long long[:, ::1] cat_bits,
              const int[::1] roots, int max_depth,
              const double[:, ::1] X, double[:, ::1] out,
              intp start, intp stop):
    """Add path-dependent SHAP values of rows ``start:stop`` into ``out``."""
    cdef Ens e
    cdef intp i, t
    cdef PathElement* path
    _bind(&e, feature, threshold, left, right, value, cover, is_cat, cat_bits)
    path = <PathElement*>malloc(_path_size(max_depth) * sizeof(PathElement))
    if path == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(start, stop):
                for t in range(roots.shape[0]):
                    shap_recurse(&e, &X[i, 0], &out[i, 0], roots[t], path, 0,
                                 1.0, 1.0, -1, 0, 0, 1.0)
    finally:
        free(path)


def tree_shap_interactions(const int[::1] feature, const double[::1] threshold,
                           const int[::1] left, const int[::1] right,
                           const double[::1] value, const double[::1] cover,
                           const unsigned char[::1] is_cat,
                           const unsigned long long[:, ::1] cat_bits,
                           const int[::1] roots, int max_depth,
                           const int[::1] tree_feat_ptr, const int[::1] tree_feat_idx,
                           const double[:, ::1] X, double[:, :, ::1] out,
                           intp start, intp stop):
    """Write SHAP interaction matrices of rows ``start:stop`` into ``out``.

    Off-diagonal entries come from conditioning TreeSHAP on each feature
    being present versus absent, halved, then symmetrised; the diagonal is
    the SHAP value minus the rest of its row.
    """
    cdef Ens e
    cdef intp i, t, a, j, k
    cdef intp n_features = X.shape[1]
    cdef PathElement* path
    cdef double* phi
    cdef double* on
    cdef double* off
    cdef double* acc
    cdef double s
    _bind(&e, feature, threshold, left, right, value, cover, is_cat, cat_bits)
    path = <PathElement*>malloc(_path_size(max_depth) * sizeof(PathElement))
    phi = <double*>malloc(n_features * sizeof(double))
    on = <double*>malloc(n_features * sizeof(double))
    off = <double*>malloc(n_features * sizeof(double))
    acc = <double*>malloc(n_features * n_features * sizeof(double))
    if path == NULL or phi == NULL or on == NULL or off == NULL or acc == NULL:
        free(path); free(phi); free(on); free(off); free(acc)
        raise MemoryError()
    try:
        with nogil:
            for i in range(start, stop):
                memset(phi, 0, n_features * sizeof(double))
                memset(acc, 0, n_features * n_features * sizeof(double))
                for t in range(roots.shape[0]):
                    shap_recurse(&e, &X[i, 0], phi, roots[t], path, 0,
                                 1.0, 1.0, -1, 0, 0, 1.0)
                for t in range(roots.shape[0]):
                    for a in range(tree_feat_ptr[t], tree_feat_ptr[t + 1]):
                        j = tree_feat_idx[a]
                        memset(on, 0, n_features * sizeof(double))
                        memset(off, 0, n_features * sizeof(double))
                        shap_recurse(&e, &X[i, 0], on, roots[t], path, 0,
                                     1.0, 1.0, -1, 1, <int>j, 1.0)
                        shap_recurse(&e, &X[i, 0], off, roots[t], path, 0,
                                     1.0, 1.0, -1, -1, <int>j, 1.0)
                        for k in range(n_features):
                            acc[j * n_features + k] += (on[k] - off[k]) / 2.0
                for j in range(n_features):
                    s = 0.0
                    for k in range(n_features):
                        if k != j:
                            out[i, j, k] = (acc[j * n_features + k] + acc[k * n_features + j]) / 2.0
                            s += out[i, j, k]
                    out[i, j, j] = phi[j] - s
    finally:
        free(path); free(phi); free(on); free(off); free(acc)
