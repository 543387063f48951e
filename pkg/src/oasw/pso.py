"""Particle swarm search over bounded mixed integer/real spaces, and the two
tuning wrappers built on it (OASW thresholds/windows, GBDT hyperparameters)."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .engine import OaswParams, run_stream
from .gbdt import ClassifierParams, fit_arrays

log = logging.getLogger(__name__)

OPEN_EPS = 1e-6


@dataclass(frozen=True)
class Dim:
    name: str
    kind: str  # "int" or "real"
    low: float
    high: float
    open_low: bool = False
    open_high: bool = False

    def __post_init__(self):
        if self.kind not in ("int", "real"):
            raise ValueError(f"{self.name}: kind must be 'int' or 'real'")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high")

    @property
    def inner(self) -> tuple[float, float]:
        """Closed interval positions are clamped to."""
        lo = self.low + OPEN_EPS if self.open_low else self.low
        hi = self.high - OPEN_EPS if self.open_high else self.high
        if lo > hi:
            lo = hi = 0.5 * (self.low + self.high)
        return lo, hi

    def decode(self, x: float):
        lo, hi = self.inner
        x = min(max(float(x), lo), hi)
        if self.kind == "real":
            return x
        v = int(round(x))
        return min(max(v, math.ceil(lo)), math.floor(hi)) if math.ceil(lo) <= math.floor(hi) else v


@dataclass(frozen=True)
class HyperParamSpace:
    dims: tuple[Dim, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = zip(*(d.inner for d in self.dims))
        return np.array(lo), np.array(hi)

    def decode(self, position) -> dict:
        return {d.name: d.decode(x) for d, x in zip(self.dims, position)}

    def encode(self, config: dict) -> np.ndarray:
        return np.array([float(config[d.name]) for d in self.dims])

    def midpoint(self) -> dict:
        lo, hi = self.bounds()
        return self.decode(0.5 * (lo + hi))

    def restricted(self, names: Sequence[str]) -> "HyperParamSpace":
        return HyperParamSpace(tuple(d for d in self.dims if d.name in set(names)))


# search ranges from the tuned-hyperparameter table
OASW_SPACE = HyperParamSpace((
    Dim("alpha", "real", 0.95, 1.0, open_low=True, open_high=True),
    Dim("beta", "real", 0.90, 1.0, open_low=True, open_high=True),
    Dim("t", "int", 100, 1000),
    Dim("t_prime_max", "int", 500, 5000),
))

CLASSIFIER_SPACE = HyperParamSpace((
    Dim("n_estimators", "int", 50, 500),
    Dim("max_depth", "int", 5, 50),
    Dim("learning_rate", "real", 0.0, 1.0, open_low=True, open_high=True),
    Dim("num_leaves", "int", 100, 2000),
    Dim("min_data_in_leaf", "int", 10, 50),
))


@dataclass
class PsoConfig:
    swarm_size: int = 20
    w: float = 0.7298
    c1: float = 1.4962
    c2: float = 1.4962
    velocity_clamp_fraction: float = 0.2
    max_evaluations: int = 200
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if self.max_evaluations < self.swarm_size:
            raise ValueError("max_evaluations must be >= swarm_size")


@dataclass
class Evaluation:
    index: int
    config: dict
    score: float
    best_score: float


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_config: dict
    best_score: float
    history: list[Evaluation] = field(default_factory=list)

    @property
    def best_history(self) -> list[float]:
        return [h.best_score for h in self.history]


def _safe_call(objective, config):
    try:
        score = float(objective(config))
    except Exception as exc:
        log.warning("objective failed for %s: %s", config, exc)
        return -math.inf
    return score if not math.isnan(score) else -math.inf


def pso_maximize(space: HyperParamSpace, objective: Callable[[dict], float], config: PsoConfig, *,
                 repair: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
                 initial_positions=None, initial_velocities=None, seed_configs=()) -> PsoResult:
    """Synchronous global-best PSO; higher objective scores are better.

    Positions stay continuous and are clamped to the bounds after every move;
    integer dimensions are rounded only when a configuration is decoded for
    evaluation. Exactly ``config.max_evaluations`` objective calls are made (the
    last iteration may evaluate only part of the swarm). ``repair`` may move a
    particle to a feasible point before it is evaluated. ``seed_configs``
    replace the first random starting positions.
    """
    if len(space) == 0:
        raise ValueError("empty search space")
    rng = np.random.default_rng(config.seed)
    lo, hi = space.bounds()
    span = hi - lo
    vmax = config.velocity_clamp_fraction * np.where(span > 0, span, 1.0)
    n, d = config.swarm_size, len(space)
    x = lo + rng.random((n, d)) * span if initial_positions is None else np.array(initial_positions, float)
    v = rng.uniform(-vmax, vmax, (n, d)) if initial_velocities is None else np.array(initial_velocities, float)
    if x.shape != (n, d) or v.shape != (n, d):
        raise ValueError("initial positions/velocities must have shape (swarm_size, dims)")
    for i, cfg in enumerate(list(seed_configs)[:n]):
        x[i] = space.encode(cfg)
    x = np.clip(x, lo, hi)
    pbest = x.copy()
    pbest_score = np.full(n, -math.inf)
    gbest = x[0].copy()
    gbest_score = -math.inf
    history: list[Evaluation] = []
    budget = config.max_evaluations
    pool = ThreadPoolExecutor(config.jobs) if config.jobs > 1 else None
    try:
        while len(history) < budget:
            k = min(n, budget - len(history))
            if repair is not None:
                for i in range(k):
                    x[i] = np.clip(repair(x[i], rng), lo, hi)
            configs = [space.decode(x[i]) for i in range(k)]
            if pool is not None:
                scores = list(pool.map(lambda c: _safe_call(objective, c), configs))
            else:
                scores = [_safe_call(objective, c) for c in configs]
            for i, (c, s) in enumerate(zip(configs, scores)):
                if s > pbest_score[i]:
                    pbest_score[i] = s
                    pbest[i] = x[i]
                if s > gbest_score:
                    gbest_score = s
                    gbest = x[i].copy()
                history.append(Evaluation(len(history), c, s, gbest_score))
            if len(history) >= budget:
                break
            r1 = rng.random((n, d))
            r2 = rng.random((n, d))
            v = config.w * v + config.c1 * r1 * (pbest - x) + config.c2 * r2 * (gbest - x)
            v = np.clip(v, -vmax, vmax)
            x = np.clip(x + v, lo, hi)
    finally:
        if pool is not None:
            pool.shutdown()
    return PsoResult(gbest, space.decode(gbest), gbest_score, history)


def write_trace(result: PsoResult, path) -> None:
    """Tuning trace CSV: evaluation index, decoded configuration, score."""
    names = list(result.history[0].config) if result.history else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evaluation_index", *names, "score", "best_score"])
        for h in result.history:
            w.writerow([h.index, *(repr(h.config[k]) for k in names), repr(h.score), repr(h.best_score)])


# --------------------------------------------------------------------------- #
# OASW tuning
# --------------------------------------------------------------------------- #


def _oasw_repair(space: HyperParamSpace):
    names = space.names
    ia, ib = names.index("alpha"), names.index("beta")
    beta_lo = space.dims[ib].inner[0]

    def repair(pos, rng):
        pos = pos.copy()
        if pos[ib] >= pos[ia]:
            # resample beta uniformly below alpha
            pos[ib] = beta_lo + rng.random() * max(pos[ia] - beta_lo - OPEN_EPS, 0.0)
        return pos

    return repair


def oasw_params_from(config: dict) -> OaswParams:
    t = int(config["t"])
    return OaswParams(alpha=float(config["alpha"]), beta=float(config["beta"]), t=t,
                      t_prime_max=max(int(config["t_prime_max"]), t))


@dataclass
class OaswTuneResult:
    hp_opt: OaswParams
    max_acc: float
    search: PsoResult


def tune_oasw(stream, offline_model, space: HyperParamSpace = OASW_SPACE, config: PsoConfig | None = None,
              *, learner=None, tune_fraction: float | None = None, include_midpoint: bool = True) -> OaswTuneResult:
    """Pick (alpha, beta, t, t_prime_max) maximising OASW average accuracy.

    Every candidate replays the stream from the start with the offline model.
    By default the whole stream is used for tuning, which is also the stream
    later reported on; pass ``tune_fraction`` to tune on a leading prefix
    only. With ``include_midpoint`` one particle starts at the middle of the
    space, so the result is never worse than that default.
    """
    config = config or PsoConfig()
    if set(space.names) != {"alpha", "beta", "t", "t_prime_max"}:
        raise ValueError("OASW space must have exactly alpha, beta, t, t_prime_max")
    tuning = stream
    if tune_fraction is not None:
        if not 0.0 < tune_fraction <= 1.0:
            raise ValueError("tune_fraction must be in (0, 1]")
        tuning = stream[: max(1, int(round(tune_fraction * len(stream))))]
    else:
        log.warning("tuning OASW on the full evaluation stream; reported accuracy is optimistic")

    def objective(cfg):
        return run_stream(offline_model, tuning.clone(), oasw_params_from(cfg), learner).avg_accuracy

    seeds = [space.midpoint()] if include_midpoint else []
    res = pso_maximize(space, objective, config, repair=_oasw_repair(space), seed_configs=seeds)
    return OaswTuneResult(oasw_params_from(res.best_config), res.best_score, res)


# --------------------------------------------------------------------------- #
# classifier tuning
# --------------------------------------------------------------------------- #


def sequential_folds(n: int, folds: int) -> list[tuple[slice, slice]]:
    """Expanding-window folds: train on chunks ``[0, k]``, validate on ``k + 1``."""
    edges = np.linspace(0, n, folds + 2).round().astype(int)
    return [(slice(0, edges[k + 1]), slice(edges[k + 1], edges[k + 2])) for k in range(folds)]


def fold_accuracy(X, y, params: ClassifierParams, folds: int) -> float:
    accs = []
    for tr, va in sequential_folds(len(y), folds):
        model = fit_arrays(X[tr], y[tr], params)
        accs.append(float((model.predict(X[va]) == y[va]).mean()))
    return float(np.mean(accs))


def classifier_params_from(config: dict, base: ClassifierParams | None = None) -> ClassifierParams:
    base = base or ClassifierParams()
    return replace(base, **{k: config[k] for k in config})


def search_classifier(offline, space: HyperParamSpace = CLASSIFIER_SPACE, config: PsoConfig | None = None,
                      folds: int = 3, *, base: ClassifierParams | None = None,
                      include_midpoint: bool = True) -> PsoResult:
    """PSO over GBDT hyperparameters scored by mean sequential-fold accuracy."""
    config = config or PsoConfig()
    X, y = offline.X, offline.y
    min_leaf = [d for d in space.dims if d.name == "min_data_in_leaf"]
    need = folds * (int(min_leaf[0].high) if min_leaf else (base or ClassifierParams()).min_data_in_leaf)
    if folds < 1 or len(y) < need:
        raise ValueError(f"offline set of {len(y)} samples is too small for {folds} folds (need {need})")

    def objective(cfg):
        return fold_accuracy(X, y, classifier_params_from(cfg, base), folds)

    seeds = [space.midpoint()] if include_midpoint else []
    return pso_maximize(space, objective, config, seed_configs=seeds)


def tune_classifier(offline, space: HyperParamSpace = CLASSIFIER_SPACE, config: PsoConfig | None = None,
                    folds: int = 3, *, base: ClassifierParams | None = None) -> ClassifierParams:
    """Best GBDT hyperparameters for the offline stage."""
    res = search_classifier(offline, space, config, folds, base=base)
    return classifier_params_from(res.best_config, base)
