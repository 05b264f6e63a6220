"""Compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--rows 2000] [--repeat 3] [--json out.json]

Each kernel runs on identical inputs under both backends; outputs are
checked for bit equality and the best of ``--repeat`` wall-clock times is
reported.
"""

import argparse
import json
import sys
import time

import numpy as np

from workshap import _backend, gbdt, synth, treeshap
from workshap.gbdt.binning import BinMapper


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rows):
    ds = synth.generate(synth.GeneratorSpec(n=max(rows, 2000), seed=0))
    model = gbdt.train(ds, "work", gbdt.Hyperparams(num_trees=50, max_leaves=15))
    X = ds.X[:rows]
    binned = BinMapper(ds.schema).fit(ds.X, ds.weights).transform(ds.X)
    grad = np.random.default_rng(0).normal(size=len(ds))
    hess = np.ones(len(ds))
    all_rows = np.arange(len(ds), dtype=np.intp)

    def histogram():
        out = np.zeros((binned.shape[1], 256, 3))
        _backend.build_histogram(binned, all_rows, grad, hess, hess, out)
        return out

    small = gbdt.Hyperparams(num_trees=10, max_leaves=15)
    return {
        "histogram": histogram,
        "predict": lambda: model.predict_margin(X),
        "shap": lambda: treeshap.shap_values(model, X).values,
        "interactions": lambda: treeshap.interaction_values(model, X[: max(1, rows // 20)]).values,
        "train (10 trees)": lambda: gbdt.train(ds, "work", small).predict_margin(X),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", help="also write results here")
    args = p.parse_args(argv)
    if "cython" not in _backend.available():
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1

    results = []
    print(f"{'kernel':<18}{'cython s':>12}{'python s':>12}{'speedup':>10}  identical")
    for name, fn in cases(args.rows).items():
        timings, outputs = {}, {}
        for backend in ("cython", "python"):
            with _backend.use_backend(backend):
                timings[backend], outputs[backend] = best_time(fn, args.repeat)
        same = bool(np.array_equal(outputs["cython"], outputs["python"]))
        speedup = timings["python"] / timings["cython"]
        print(f"{name:<18}{timings['cython']:>12.4f}{timings['python']:>12.4f}{speedup:>9.1f}x  {same}")
        results.append({"kernel": name, **{f"{k}_seconds": v for k, v in timings.items()},
                        "speedup": speedup, "identical": same})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"rows": args.rows, "repeat": args.repeat, "results": results}, fh, indent=2)
    return 0 if all(r["identical"] for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
