"""The compiled loop kernels and the numpy fallback must agree bit for bit."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from oasw import kernels
from oasw.gbdt import ClassifierParams, fit_arrays

LAM = 1.0


def _problem(seed, n=200, d=4, ties=False):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    if ties:
        X = np.round(X, 1)
    g = rng.normal(size=n)
    h = rng.uniform(0.05, 0.25, size=n)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    return X, g, h, order


def _brute_force_split(X, g, h, idx, min_data):
    """Every distinct-value boundary of every feature, scored directly."""
    G, H = g[idx].sum(), h[idx].sum()
    parent = G * G / (H + LAM)
    best = -np.inf
    for f in range(X.shape[1]):
        vals = np.unique(X[idx, f])
        for a, b in zip(vals[:-1], vals[1:]):
            left = idx[X[idx, f] <= (a + b) / 2]
            right = idx[X[idx, f] > (a + b) / 2]
            if len(left) < min_data or len(right) < min_data:
                continue
            gl, hl = g[left].sum(), h[left].sum()
            gr, hr = g[right].sum(), h[right].sum()
            best = max(best, gl * gl / (hl + LAM) + gr * gr / (hr + LAM) - parent)
    return best


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("ties", [False, True])
def test_split_matches_brute_force(seed, ties):
    X, g, h, order = _problem(seed, n=60, d=3, ties=ties)
    for min_data in (1, 5, 20):
        f, thr, gain, nl, G, H = kernels.find_best_split_numpy(X, g, h, order, 0, 60, min_data, LAM)
        oracle = _brute_force_split(X, g, h, np.arange(60), min_data)
        if f < 0:
            assert oracle == -np.inf
            continue
        assert gain == pytest.approx(oracle, rel=1e-9, abs=1e-12)
        assert nl == int(np.sum(X[:, f] <= thr))


@pytest.mark.parametrize("seed", range(10))
def test_split_numba_equals_numpy(seed):
    X, g, h, order = _problem(seed, ties=seed % 2 == 1)
    for start, end, md in ((0, 200, 1), (0, 200, 20), (30, 170, 7), (50, 60, 5), (0, 5, 3)):
        a = kernels.find_best_split_loops(X, g, h, order, start, end, md, LAM)
        b = kernels.find_best_split_numpy(X, g, h, order, start, end, md, LAM)
        assert tuple(a) == tuple(b)


@pytest.mark.parametrize("seed", range(5))
def test_partition_numba_equals_numpy(seed):
    X, g, h, order = _problem(seed)
    o1, o2 = order.copy(), order.copy()
    buf = np.empty(200, dtype=np.int64)
    # root split, then a split of the left child: each is a genuine node segment
    steps = [(0, 200, 1, float(np.median(X[:, 1]))), (0, None, 2, 0.0)]
    n_prev = 200
    for start, end, feat, thr in steps:
        end = n_prev if end is None else end
        n1 = kernels.partition_loops(o1, start, end, X, feat, thr, buf)
        n2 = kernels.partition_numpy(o2, start, end, X, feat, thr, buf)
        assert n1 == n2
        assert np.array_equal(o1, o2)
        for f in range(X.shape[1]):
            for seg in (o1[f, start:start + n1], o1[f, start + n1:end]):
                assert np.all(np.diff(X[seg, f]) >= 0)
            assert np.all(X[o1[f, start:start + n1], feat] <= thr)
        n_prev = n1


def _forest_arrays():
    X = np.random.default_rng(0).normal(size=(500, 5))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    model = fit_arrays(X, y, ClassifierParams(n_estimators=15, max_depth=5, num_leaves=12, min_data_in_leaf=5))
    return X, model._arrays()


def test_forest_numba_equals_numpy():
    X, arrays = _forest_arrays()
    a = kernels.forest_raw_loops(X, *arrays)
    b = kernels.forest_raw_numpy(X, *arrays)
    assert np.array_equal(a, b)
    for r in range(0, 500, 37):
        assert kernels.forest_raw_one_loops(X[r], *arrays) == kernels.forest_raw_one_numpy(X[r], *arrays) == a[r]


def test_fit_identical_across_backends(monkeypatch):
    X = np.random.default_rng(1).normal(size=(400, 4))
    y = (X[:, 0] + 0.5 * X[:, 2] > 0).astype(int)
    params = ClassifierParams(n_estimators=10, max_depth=6, num_leaves=20, min_data_in_leaf=5,
                              goss_enabled=True, seed=3)
    a = fit_arrays(X, y, params).to_dict()
    for name in ("segment_sums", "find_best_split", "partition", "forest_raw", "forest_raw_one"):
        monkeypatch.setattr(kernels, name, getattr(kernels, f"{name}_numpy"))
    b = fit_arrays(X, y, params).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_env_flag_selects_numpy_backend():
    code = "import oasw.kernels as k; print(k.BACKEND, k.find_best_split is k.find_best_split_numpy)"
    env = dict(os.environ, OASW_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
