"""Gradient-boosted decision trees for binary classification.

Leaf-wise (best-first) growth with exact threshold search, logistic loss and
Newton leaf values ``-G / (H + l2)``. Optional gradient-based one-side
sampling (GOSS) draws each tree's training set from the largest-gradient
samples plus a reweighted random slice of the rest.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels

L2_REG = 1.0
MIN_SPLIT_GAIN = 0.0
# tolerance on the gain test so float noise around exact-zero gains (XOR) does not block a split
GAIN_TOL = 1e-12
LOGIT_CLAMP = 30.0
PRIOR_CLIP = 1e-7
MODEL_FORMAT = "oasw-gbdt"
MODEL_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierParams:
    n_estimators: int = 100
    max_depth: int = 8
    learning_rate: float = 0.1
    num_leaves: int = 31
    min_data_in_leaf: int = 20
    goss_enabled: bool = False
    goss_top_fraction: float = 0.2
    goss_rand_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ModelError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ModelError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate < 1.0:
            raise ModelError("learning_rate must lie in the open interval (0, 1)")
        if self.num_leaves < 2:
            raise ModelError("num_leaves must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ModelError("min_data_in_leaf must be >= 1")
        a, b = self.goss_top_fraction, self.goss_rand_fraction
        if not (0.0 < a and 0.0 < b and a + b <= 1.0):
            raise ModelError("GOSS fractions need 0 < a, 0 < b, a + b <= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierParams":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def max_depth(self) -> int:
        return int(self.depth.max()) if self.n_nodes else 0

    def leaf_counts(self) -> np.ndarray:
        return self.count[self.feature < 0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
            "depth": self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            count=np.asarray(d["count"], dtype=np.int64),
            depth=np.asarray(d["depth"], dtype=np.int64),
        )


class GbdtModel:
    """Fitted ensemble. Immutable after construction; safe to share read-only."""

    def __init__(self, trees: Sequence[Tree], base_score: float, params: ClassifierParams,
                 schema_width: int, train_loss: Sequence[float] = ()):
        self.trees = list(trees)
        self.base_score = float(base_score)
        self.params = params
        self.schema_width = int(schema_width)
        self.train_loss = list(train_loss)
        self._flatten()

    def _flatten(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
        if self.trees:
            cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
            shift = np.concatenate([np.full(t.n_nodes, o) for t, o in zip(self.trees, offsets)])
            self._feature = cat("feature").astype(np.int64)
            self._threshold = cat("threshold").astype(np.float64)
            self._left = np.where(self._feature >= 0, cat("left") + shift, -1).astype(np.int64)
            self._right = np.where(self._feature >= 0, cat("right") + shift, -1).astype(np.int64)
            self._value = cat("value").astype(np.float64)
        else:
            self._feature = np.zeros(0, np.int64)
            self._threshold = np.zeros(0)
            self._left = np.zeros(0, np.int64)
            self._right = np.zeros(0, np.int64)
            self._value = np.zeros(0)
        self._roots = offsets[:-1].astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self._feature)

    def _arrays(self):
        return self._feature, self._threshold, self._left, self._right, self._value, self._roots

    def _check_width(self, width: int):
        if width != self.schema_width:
            raise ModelError(f"feature width {width} does not match model schema width {self.schema_width}")

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        self._check_width(X.shape[1])
        raw = kernels.forest_raw(X, *self._arrays())
        return np.clip(self.base_score + self.params.learning_rate * raw, -LOGIT_CLAMP, LOGIT_CLAMP)

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def predict_one(self, x) -> tuple[int, float]:
        """Class and positive-class probability for a single feature vector."""
        x = np.asarray(x, dtype=np.float64)
        self._check_width(x.shape[0])
        raw = kernels.forest_raw_one(x, *self._arrays())
        z = min(max(self.base_score + self.params.learning_rate * raw, -LOGIT_CLAMP), LOGIT_CLAMP)
        p = 1.0 / (1.0 + math.exp(-z))
        return int(p >= 0.5), p

    # ----------------------------------------------------------------- io --

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "base_score": self.base_score,
            "schema_width": self.schema_width,
            "params": self.params.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format") != MODEL_FORMAT:
            raise ModelError(f"not a {MODEL_FORMAT} document")
        if d.get("version") != MODEL_VERSION:
            raise ModelError(f"unsupported model version {d.get('version')!r}")
        return cls([Tree.from_dict(t) for t in d["trees"]], d["base_score"],
                   ClassifierParams.from_dict(d["params"]), d["schema_width"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "GbdtModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def log_loss(y, raw) -> float:
    # log(1 + e^z) - y z, stable for both signs
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


# --------------------------------------------------------------------- GOSS --


def goss_subsample(gradients, a: float, b: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Indices kept by one-side sampling and their gradient weights.

    The ``ceil(a N)`` largest ``|gradient|`` samples keep weight 1; ``ceil(b N)``
    of the remainder are drawn uniformly without replacement and weighted
    ``(1 - a) / b``. Returned indices are sorted ascending.
    """
    if not (a > 0 and b > 0):
        raise ValueError("GOSS fractions must be positive")
    if a + b > 1.0 + 1e-12:
        raise ValueError(f"a + b must be <= 1, got {a + b}")
    g = np.asarray(gradients, dtype=np.float64)
    n = g.size
    n_top = min(math.ceil(round(a * n, 9)), n)
    order = np.argsort(-np.abs(g), kind="stable")
    top, rest = order[:n_top], order[n_top:]
    n_rand = min(math.ceil(round(b * n, 9)), rest.size)
    rng = np.random.default_rng(seed)
    picked = rng.choice(rest, size=n_rand, replace=False) if n_rand else rest[:0]
    idx = np.concatenate([top, picked])
    w = np.concatenate([np.ones(n_top), np.full(n_rand, (1.0 - a) / b)])
    perm = np.argsort(idx, kind="stable")
    return idx[perm], w[perm]


# ---------------------------------------------------------------------- fit --


def _build_tree(X, g, h, order, params: ClassifierParams) -> Tree:
    n_sel = order.shape[1]
    buf = np.empty(n_sel, dtype=np.int64)
    min_data = params.min_data_in_leaf
    feature, threshold, left, right, value, count, depth, seg = [], [], [], [], [], [], [], []

    def add_node(start, end, dep):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        count.append(end - start)
        depth.append(dep)
        seg.append((start, end))
        return len(feature) - 1

    candidates: dict[int, tuple] = {}

    def evaluate(node):
        start, end = seg[node]
        f, thr, gain, n_left, G, H = kernels.find_best_split(X, g, h, order, start, end, min_data, L2_REG)
        value[node] = -G / (H + L2_REG)
        if depth[node] < params.max_depth and f >= 0 and gain >= MIN_SPLIT_GAIN - GAIN_TOL:
            candidates[node] = (gain, int(f), float(thr))

    evaluate(add_node(0, n_sel, 0))
    n_leaves = 1
    while n_leaves < params.num_leaves and candidates:
        node = max(candidates, key=lambda k: (candidates[k][0], -k))
        gain, f, thr = candidates.pop(node)
        start, end = seg[node]
        n_left = int(kernels.partition(order, start, end, X, f, thr, buf))
        feature[node] = f
        threshold[node] = thr
        left[node] = add_node(start, start + n_left, depth[node] + 1)
        right[node] = add_node(start + n_left, end, depth[node] + 1)
        n_leaves += 1
        evaluate(left[node])
        evaluate(right[node])

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        count=np.asarray(count, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
    )


def _tree_raw(tree: Tree, X) -> np.ndarray:
    return kernels.forest_raw(X, tree.feature, tree.threshold, tree.left, tree.right,
                              tree.value, np.zeros(1, dtype=np.int64))


def fit_arrays(X, y, params: ClassifierParams) -> GbdtModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ModelError("fit needs at least one sample")
    if X.shape[1] == 0:
        raise ModelError("fit needs at least one feature")
    if len(y) != X.shape[0]:
        raise ModelError("feature and label counts differ")
    n, d = X.shape
    prior = min(max(float(y.mean()), PRIOR_CLIP), 1.0 - PRIOR_CLIP)
    base = math.log(prior / (1.0 - prior))
    F = np.full(n, base)
    presorted = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    trees, losses = [], [log_loss(y, F)]
    lr = params.learning_rate
    for m in range(params.n_estimators):
        p = _sigmoid(F)
        g = p - y
        h = p * (1.0 - p)
        if params.goss_enabled:
            idx, w = goss_subsample(g, params.goss_top_fraction, params.goss_rand_fraction,
                                    seed=[params.seed, m])
            weight = np.zeros(n)
            weight[idx] = w
            g = g * weight
            h = h * weight
            keep = weight[presorted] > 0
            order = np.ascontiguousarray(presorted[keep].reshape(d, idx.size))
        else:
            order = presorted.copy()
        tree = _build_tree(X, g, h, order, params)
        trees.append(tree)
        F = F + lr * _tree_raw(tree, X)
        losses.append(log_loss(y, F))
    return GbdtModel(trees, base, params, d, train_loss=losses)


def fit(samples, params: ClassifierParams) -> GbdtModel:
    """Fit from a sequence of ``LabeledSample`` (or a ``StreamSource``)."""
    if hasattr(samples, "X") and hasattr(samples, "y"):
        return fit_arrays(samples.X, samples.y, params)
    samples = list(samples)
    if not samples:
        raise ModelError("fit needs at least one sample")
    widths = {len(s.features) for s in samples}
    if len(widths) != 1:
        raise ModelError(f"inconsistent feature widths {sorted(widths)}")
    X = np.vstack([s.features for s in samples])
    y = np.array([s.label for s in samples])
    return fit_arrays(X, y, params)


def predict(model: GbdtModel, features) -> tuple[int, float]:
    return model.predict_one(features)


@dataclass
class GbdtLearner:
    """Retrainable-classifier contract: ``fit`` always builds a fresh model."""

    params: ClassifierParams = field(default_factory=ClassifierParams)

    def fit(self, X, y) -> GbdtModel:
        return fit_arrays(X, y, self.params)

    def with_params(self, **changes) -> "GbdtLearner":
        return GbdtLearner(replace(self.params, **changes))
