"""Numeric inner loops for tree fitting and scoring.

Every kernel has two implementations with identical results: a loop version
compiled with numba and a vectorised numpy version. The numba path is used when
numba imports cleanly and ``OASW_DISABLE_NUMBA`` is unset (or ``0``); otherwise
the numpy path is used. Both are always importable under explicit names
(``*_loops`` / ``*_numpy``) so tests and benchmarks can compare them.

Summations run sequentially in both paths (``np.cumsum`` rather than
``np.sum``) so that the two backends agree bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("OASW_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLE:
        raise ImportError("numba disabled by OASW_DISABLE_NUMBA")
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via the env flag in CI
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"


# --------------------------------------------------------------------------- #
# loop implementations (compiled when numba is on)
# --------------------------------------------------------------------------- #


def segment_sums_loops(g, h, order, start, end):
    G = 0.0
    H = 0.0
    for k in range(start, end):
        i = order[0, k]
        G += g[i]
        H += h[i]
    return G, H


def find_best_split_loops(X, g, h, order, start, end, min_data, lam):
    """Exact greedy split scan over a node's presorted segment.

    Returns ``(feature, threshold, gain, n_left, G, H)``; feature is -1 when no
    admissible split exists. Ties keep the first candidate found (lowest
    feature, then lowest threshold).
    """
    n = end - start
    G, H = segment_sums_loops(g, h, order, start, end)
    parent = G * G / (H + lam)
    best_feat = -1
    best_thr = 0.0
    best_gain = -np.inf
    best_left = 0
    if n < 2 * min_data:
        return best_feat, best_thr, best_gain, best_left, G, H
    d = order.shape[0]
    for f in range(d):
        gl = 0.0
        hl = 0.0
        for k in range(start, end - 1):
            i = order[f, k]
            gl += g[i]
            hl += h[i]
            nl = k - start + 1
            if n - nl < min_data:
                break
            if nl < min_data:
                continue
            xv = X[i, f]
            xn = X[order[f, k + 1], f]
            if xn <= xv:
                continue
            gr = G - gl
            hr = H - hl
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
            if gain > best_gain:
                thr = 0.5 * (xv + xn)
                if thr >= xn:
                    thr = xv
                best_gain = gain
                best_feat = f
                best_thr = thr
                best_left = nl
    return best_feat, best_thr, best_gain, best_left, G, H


def partition_loops(order, start, end, X, feat, thr, buf):
    """Stable in-place partition of every feature row of a segment.

    Samples with ``X[:, feat] <= thr`` move to the front. ``buf`` is scratch
    space of at least ``end - start`` ints. Returns the left count.
    """
    d = order.shape[0]
    n_left = 0
    for f in range(d):
        lo = start
        hi = 0
        for k in range(start, end):
            i = order[f, k]
            if X[i, feat] <= thr:
                order[f, lo] = i
                lo += 1
            else:
                buf[hi] = i
                hi += 1
        for k in range(hi):
            order[f, lo + k] = buf[k]
        n_left = lo - start
    return n_left


def forest_raw_loops(X, feature, threshold, left, right, value, roots):
    """Sum of leaf values over all trees for each row of ``X``."""
    n = X.shape[0]
    out = np.zeros(n)
    for r in range(n):
        acc = 0.0
        for t in range(roots.shape[0]):
            node = roots[t]
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[r] = acc
    return out


def forest_raw_one_loops(x, feature, threshold, left, right, value, roots):
    acc = 0.0
    for t in range(roots.shape[0]):
        node = roots[t]
        while feature[node] >= 0:
            if x[feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        acc += value[node]
    return acc


# --------------------------------------------------------------------------- #
# numpy implementations
# --------------------------------------------------------------------------- #


def segment_sums_numpy(g, h, order, start, end):
    idx = order[0, start:end]
    if idx.size == 0:
        return 0.0, 0.0
    return float(np.cumsum(g[idx])[-1]), float(np.cumsum(h[idx])[-1])


def find_best_split_numpy(X, g, h, order, start, end, min_data, lam):
    n = end - start
    G, H = segment_sums_numpy(g, h, order, start, end)
    parent = G * G / (H + lam)
    best = (-1, 0.0, -np.inf, 0)
    if n < 2 * min_data:
        return best + (G, H)
    # candidate k splits after position k (0-based within segment): left count k+1
    nl = np.arange(1, n)
    admissible = (nl >= min_data) & (n - nl >= min_data)
    for f in range(order.shape[0]):
        idx = order[f, start:end]
        xs = X[idx, f]
        gl = np.cumsum(g[idx])[:-1]
        hl = np.cumsum(h[idx])[:-1]
        ok = admissible & (xs[1:] > xs[:-1])
        if not ok.any():
            continue
        gr = G - gl
        hr = H - hl
        gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
        gain = np.where(ok, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > best[2]:
            thr = 0.5 * (xs[k] + xs[k + 1])
            if thr >= xs[k + 1]:
                thr = xs[k]
            best = (f, float(thr), float(gain[k]), k + 1)
    return best + (G, H)


def partition_numpy(order, start, end, X, feat, thr, buf=None):
    seg = order[:, start:end]
    goes_right = X[seg, feat] > thr
    perm = np.argsort(goes_right, axis=1, kind="stable")
    order[:, start:end] = np.take_along_axis(seg, perm, axis=1)
    return int(seg.shape[1] - goes_right[0].sum())


def forest_raw_numpy(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    if roots.size == 0:
        return np.zeros(n)
    node = np.broadcast_to(roots, (n, roots.size)).copy()
    rows = np.arange(n)[:, None]
    while True:
        feat = feature[node]
        internal = feat >= 0
        if not internal.any():
            break
        xv = X[rows, np.where(internal, feat, 0)]
        step = np.where(xv <= threshold[node], left[node], right[node])
        node = np.where(internal, step, node)
    vals = value[node]
    acc = np.zeros(n)
    for t in range(vals.shape[1]):
        acc += vals[:, t]
    return acc


def forest_raw_one_numpy(x, feature, threshold, left, right, value, roots):
    return float(forest_raw_numpy(x[None, :], feature, threshold, left, right, value, roots)[0])


# --------------------------------------------------------------------------- #
# dispatch
# --------------------------------------------------------------------------- #

if NUMBA_AVAILABLE:
    _jit = njit(cache=True, nogil=True)
    segment_sums_loops = _jit(segment_sums_loops)
    find_best_split_loops = _jit(find_best_split_loops)
    partition_loops = _jit(partition_loops)
    forest_raw_loops = _jit(forest_raw_loops)
    forest_raw_one_loops = _jit(forest_raw_one_loops)

    segment_sums = segment_sums_loops
    find_best_split = find_best_split_loops
    partition = partition_loops
    forest_raw = forest_raw_loops
    forest_raw_one = forest_raw_one_loops
else:
    segment_sums = segment_sums_numpy
    find_best_split = find_best_split_numpy
    partition = partition_numpy
    forest_raw = forest_raw_numpy
    forest_raw_one = forest_raw_one_numpy
