"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise the
pure-Python ``_fallback`` module. Setting ``WORKSHAP_PURE_PYTHON=1`` forces
the fallback at import time; :func:`use_backend` switches at runtime.
"""

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = "python" if _compiled is None or os.environ.get("WORKSHAP_PURE_PYTHON") else "cython"


def available():
    return sorted(_BACKENDS)


def name():
    return _active


def kernels():
    return _BACKENDS[_active]


def set_backend(backend):
    global _active
    if backend not in _BACKENDS:
        raise ValueError(f"backend {backend!r} unavailable; have {available()}")
    _active = backend


@contextlib.contextmanager
def use_backend(backend):
    previous = _active
    set_backend(backend)
    try:
        yield
    finally:
        set_backend(previous)


def default_threads():
    return max(1, int(os.environ.get("WORKSHAP_NUM_THREADS", "1")))


def _chunked(n, n_threads, fn):
    """Run ``fn(start, stop)`` over disjoint row ranges."""
    n_threads = max(1, min(n_threads, n))
    if n_threads == 1:
        fn(0, n)
        return
    bounds = np.linspace(0, n, n_threads + 1).astype(int)
    with ThreadPoolExecutor(n_threads) as pool:
        futures = [pool.submit(fn, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        for fut in futures:
            fut.result()


def build_histogram(binned, rows, grad, hess, weight, out):
    kernels().build_histogram(binned, rows, grad, hess, weight, out)


def predict_margin(flat, base_score, X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])
    if len(flat.roots) == 0:
        out[:] = base_score
        return out
    kernels().predict_margin(*flat.node_arrays, flat.roots, float(base_score), X, out)
    return out


def tree_shap(flat, X, n_threads=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros(X.shape)
    if len(flat.roots) == 0 or X.shape[0] == 0:
        return out
    k = kernels()
    _chunked(
        X.shape[0],
        n_threads or default_threads(),
        lambda a, b: k.tree_shap(*flat.node_arrays, flat.roots, flat.max_depth, X, out, a, b),
    )
    return out


def tree_shap_interactions(flat, X, n_threads=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, m = X.shape
    out = np.zeros((n, m, m))
    if len(flat.roots) == 0 or n == 0:
        return out
    k = kernels()
    _chunked(
        n,
        n_threads or default_threads(),
        lambda a, b: k.tree_shap_interactions(
            *flat.node_arrays, flat.roots, flat.max_depth,
            flat.tree_feat_ptr, flat.tree_feat_idx, X, out, a, b,
        ),
    )
    return out
