#!/usr/bin/env python3
"""Compare the compiled loop kernels against the numpy fallback.

Times the split scan, the node partition, batch and single-row forest scoring,
and a whole GBDT fit with each backend on the same data. Results print as a
table; ``--json`` writes them to a file as well.

    python3 benchmarks/bench_kernels.py --rows 5000 --features 20
"""

import argparse
import json
import statistics
import sys
import time
from contextlib import contextmanager

import numpy as np

from oasw import kernels
from oasw.gbdt import ClassifierParams, fit_arrays

KERNELS = ("segment_sums", "find_best_split", "partition", "forest_raw", "forest_raw_one")


def timeit(fn, repeats):
    fn()  # warm-up (and JIT compilation for the loop path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


@contextmanager
def backend(name):
    """Point the dispatch names at one implementation for the duration."""
    saved = {k: getattr(kernels, k) for k in KERNELS}
    suffix = "_loops" if name == "numba" else "_numpy"
    try:
        for k in KERNELS:
            setattr(kernels, k, getattr(kernels, k + suffix))
        yield
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def make_data(rows, features, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, features))
    y = ((X[:, 0] * X[:, 1] + X[:, 2] + 0.3 * rng.normal(size=rows)) > 0).astype(int)
    return X, y


def run(args):
    X, y = make_data(args.rows, args.features, args.seed)
    p = np.full(args.rows, 0.5)
    g, h = p - y, p * (1 - p)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    buf = np.empty(args.rows, dtype=np.int64)
    params = ClassifierParams(n_estimators=args.trees, max_depth=8, num_leaves=63, min_data_in_leaf=20)
    model = fit_arrays(X, y, params)
    arrays = model._arrays()
    thr = float(np.median(X[:, 0]))

    cases = {
        "split scan (root node)": lambda: kernels.find_best_split(X, g, h, order, 0, args.rows, 20, 1.0),
        "partition (root node)": lambda: kernels.partition(order.copy(), 0, args.rows, X, 0, thr, buf),
        "forest scoring (batch)": lambda: kernels.forest_raw(X, *arrays),
        "forest scoring (1 row)": lambda: kernels.forest_raw_one(X[0], *arrays),
        f"fit ({args.trees} trees)": lambda: fit_arrays(X, y, params),
    }
    backends = ["numpy"] + (["numba"] if kernels.NUMBA_AVAILABLE else [])
    results = {}
    for name in backends:
        with backend(name):
            for case, fn in cases.items():
                repeats = 1 if case.startswith("fit") else args.repeats
                results.setdefault(case, {})[name] = timeit(fn, repeats)
    return backends, results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    backends, results = run(args)
    print(f"rows={args.rows} features={args.features} default backend={kernels.BACKEND}")
    print(f"{'case':28s}" + "".join(f"{b:>14s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for case, row in results.items():
        line = f"{case:28s}" + "".join(f"{row[b] * 1e3:12.3f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{row['numpy'] / row['numba']:11.1f}x"
        print(line)
    if not kernels.NUMBA_AVAILABLE:
        print("numba unavailable or disabled: only the numpy path was timed", file=sys.stderr)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"args": vars(args), "seconds": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
