import math

import numpy as np
import pytest

from oasw.engine import run_stream
from oasw.gbdt import ClassifierParams
from oasw.pso import (
    CLASSIFIER_SPACE,
    OASW_SPACE,
    Dim,
    HyperParamSpace,
    PsoConfig,
    fold_accuracy,
    oasw_params_from,
    pso_maximize,
    search_classifier,
    sequential_folds,
    tune_classifier,
    tune_oasw,
    write_trace,
)
from oasw.stream import StreamSource, SyntheticDriftSpec, generate_synthetic

from conftest import SMALL_PARAMS

BOX = HyperParamSpace(tuple(Dim(f"x{i}", "real", -5.0, 5.0) for i in range(3)))


def neg_sphere(cfg):
    return -sum(v * v for v in cfg.values())


class Counter:
    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, cfg):
        self.calls += 1
        return self.fn(cfg)


def test_sphere_recovered():
    res = pso_maximize(BOX, neg_sphere, PsoConfig(swarm_size=20, max_evaluations=1000, seed=1))
    assert max(abs(v) for v in res.best_config.values()) < 1e-2
    assert np.all(np.diff(res.best_history) >= 0)


@pytest.mark.parametrize("budget", [20, 37, 100])
def test_exact_budget(budget):
    f = Counter(neg_sphere)
    res = pso_maximize(BOX, f, PsoConfig(swarm_size=10 if budget >= 10 else 2, max_evaluations=budget))
    assert f.calls == budget == len(res.history)


def test_fixed_point_does_not_move():
    seen = []

    def f(cfg):
        seen.append(tuple(cfg.values()))
        return neg_sphere(cfg)

    start = np.zeros((2, 3))
    pso_maximize(BOX, f, PsoConfig(swarm_size=2, w=0.0, max_evaluations=20),
                 initial_positions=start, initial_velocities=np.zeros((2, 3)))
    assert set(seen) == {(0.0, 0.0, 0.0)}


def test_integer_dimension_rounded():
    space = HyperParamSpace((Dim("k", "int", 1, 3),))
    seen = []

    def f(cfg):
        seen.append(cfg["k"])
        return 1.0 if cfg["k"] == 2 else 0.0

    res = pso_maximize(space, f, PsoConfig(swarm_size=5, max_evaluations=30, seed=0))
    assert res.best_config == {"k": 2}
    assert set(seen) <= {1, 2, 3} and all(isinstance(k, int) for k in seen)


def test_open_bounds_never_touched():
    space = HyperParamSpace((Dim("a", "real", 0.0, 1.0, open_low=True, open_high=True),))
    seen = []

    def f(cfg):
        seen.append(cfg["a"])
        return abs(cfg["a"] - 0.5)  # pushes particles to the edges

    pso_maximize(space, f, PsoConfig(swarm_size=4, max_evaluations=200, seed=2))
    assert 0.0 < min(seen) and max(seen) < 1.0


def test_determinism_and_scaling_invariance():
    cfg = PsoConfig(swarm_size=8, max_evaluations=80, seed=5)
    a = pso_maximize(BOX, neg_sphere, cfg)
    b = pso_maximize(BOX, neg_sphere, cfg)
    c = pso_maximize(BOX, lambda x: 7.5 * neg_sphere(x), cfg)
    assert a.best_config == b.best_config == c.best_config


def test_failing_objective_scored_minus_inf():
    def f(cfg):
        if cfg["x0"] > 0:
            raise RuntimeError("boom")
        return neg_sphere(cfg)

    res = pso_maximize(BOX, f, PsoConfig(swarm_size=6, max_evaluations=60, seed=0))
    assert any(h.score == -math.inf for h in res.history)
    assert res.best_config["x0"] <= 0 and math.isfinite(res.best_score)


def test_one_iteration_equals_best_initial():
    res = pso_maximize(BOX, neg_sphere, PsoConfig(swarm_size=10, max_evaluations=10, seed=3))
    assert res.best_score == max(h.score for h in res.history)


def test_degenerate_space_forces_values():
    space = HyperParamSpace((Dim("n", "int", 100, 100 + 1e-9), Dim("r", "real", 0.25, 0.25 + 1e-9)))
    res = pso_maximize(space, lambda c: 0.0, PsoConfig(swarm_size=2, max_evaluations=6))
    assert res.best_config["n"] == 100
    assert res.best_config["r"] == pytest.approx(0.25, abs=1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        PsoConfig(swarm_size=1)
    with pytest.raises(ValueError):
        PsoConfig(swarm_size=10, max_evaluations=5)
    with pytest.raises(ValueError):
        Dim("x", "real", 1.0, 1.0)


def test_parallel_jobs_same_result():
    a = pso_maximize(BOX, neg_sphere, PsoConfig(swarm_size=6, max_evaluations=30, seed=4))
    b = pso_maximize(BOX, neg_sphere, PsoConfig(swarm_size=6, max_evaluations=30, seed=4, jobs=3))
    assert a.best_config == b.best_config
    assert [h.score for h in a.history] == [h.score for h in b.history]


def test_trace_csv(tmp_path):
    res = pso_maximize(BOX, neg_sphere, PsoConfig(swarm_size=4, max_evaluations=9))
    path = tmp_path / "trace.csv"
    write_trace(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "evaluation_index,x0,x1,x2,score,best_score"
    assert len(lines) == 10


# ------------------------------------------------------- OASW tuning --


@pytest.fixture(scope="module")
def drift_stream():
    return generate_synthetic(SyntheticDriftSpec("sudden", [1500], noise_rate=0.05, seed=3), 4000)


SMALL_OASW = HyperParamSpace((
    Dim("alpha", "real", 0.95, 1.0, open_low=True, open_high=True),
    Dim("beta", "real", 0.90, 1.0, open_low=True, open_high=True),
    Dim("t", "int", 50, 200),
    Dim("t_prime_max", "int", 200, 800),
))


def test_tune_oasw_floor_and_repair(drift_stream, concept_a_model):
    cfg = PsoConfig(swarm_size=4, max_evaluations=8, seed=0)
    res = tune_oasw(drift_stream, concept_a_model, SMALL_OASW, cfg, tune_fraction=1.0)
    assert all(h.config["beta"] < h.config["alpha"] for h in res.search.history)
    mid = oasw_params_from(SMALL_OASW.midpoint())
    floor = run_stream(concept_a_model, drift_stream, mid).avg_accuracy
    assert res.max_acc >= floor
    assert res.hp_opt.beta < res.hp_opt.alpha
    assert res.max_acc == max(h.score for h in res.search.history)


def test_tune_oasw_one_iteration(drift_stream, concept_a_model):
    cfg = PsoConfig(swarm_size=3, max_evaluations=3, seed=1)
    res = tune_oasw(drift_stream, concept_a_model, SMALL_OASW, cfg, include_midpoint=False)
    rescored = [run_stream(concept_a_model, drift_stream, oasw_params_from(h.config)).avg_accuracy
                for h in res.search.history]
    assert res.max_acc == max(rescored)


def test_oasw_space_matches_table_ranges():
    bounds = {d.name: (d.low, d.high) for d in OASW_SPACE.dims}
    assert bounds == {"alpha": (0.95, 1.0), "beta": (0.90, 1.0), "t": (100, 1000), "t_prime_max": (500, 5000)}
    assert oasw_params_from({"alpha": 0.99, "beta": 0.95, "t": 600, "t_prime_max": 500}).t_prime_max == 600


# ------------------------------------------------- classifier tuning --


def _offline(n=600):
    src = generate_synthetic(SyntheticDriftSpec("sudden", [n], noise_rate=0.05, seed=7), n + 1)
    return src[:n]


SMALL_CLS = HyperParamSpace((
    Dim("n_estimators", "int", 5, 30),
    Dim("max_depth", "int", 2, 6),
    Dim("learning_rate", "real", 0.0, 1.0, open_low=True, open_high=True),
    Dim("num_leaves", "int", 4, 20),
    Dim("min_data_in_leaf", "int", 5, 20),
))


def test_sequential_folds_expand():
    folds = sequential_folds(100, 3)
    assert [(tr.stop, va.start, va.stop) for tr, va in folds] == [(25, 25, 50), (50, 50, 75), (75, 75, 100)]


def test_tune_classifier_floor():
    off = _offline()
    cfg = PsoConfig(swarm_size=4, max_evaluations=8, seed=0)
    res = search_classifier(off, SMALL_CLS, cfg, folds=3)
    mid = fold_accuracy(off.X, off.y, ClassifierParams(**SMALL_CLS.midpoint()), 3)
    assert res.best_score >= mid
    tuned = tune_classifier(off, SMALL_CLS, cfg, folds=3)
    for d in SMALL_CLS.dims:
        assert d.low <= getattr(tuned, d.name) <= d.high


def test_tune_classifier_degenerate_space():
    space = HyperParamSpace((Dim("n_estimators", "int", 12, 12 + 1e-9), Dim("num_leaves", "int", 7, 7 + 1e-9)))
    tuned = tune_classifier(_offline(), space, PsoConfig(swarm_size=2, max_evaluations=2), base=SMALL_PARAMS)
    assert (tuned.n_estimators, tuned.num_leaves) == (12, 7)
    assert tuned.max_depth == SMALL_PARAMS.max_depth


def test_tune_classifier_rejects_tiny_offline_set():
    tiny = StreamSource(np.zeros((40, 2)), np.arange(40) % 2)
    with pytest.raises(ValueError, match="too small"):
        search_classifier(tiny, CLASSIFIER_SPACE, PsoConfig(swarm_size=2, max_evaluations=2))
