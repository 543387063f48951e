import numpy as np
import pytest

from oasw.gbdt import ClassifierParams, fit_arrays
from oasw.stream import LabeledSample, StreamSource, SyntheticDriftSpec, generate_synthetic

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool | None, detail: str = "") -> None:
    """Print and remember one acceptance verdict line; ``ok=None`` means skipped."""
    verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"[{verdict}] {criterion}" + (f": {detail}" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


SMALL_PARAMS = ClassifierParams(n_estimators=20, max_depth=4, learning_rate=0.3, num_leaves=8,
                                min_data_in_leaf=5)


class ScriptedModel:
    """Predicts 0 for every input; correctness is then scripted by the labels."""

    params = None
    schema_width = 1

    def predict_one(self, x):
        return 0, 0.0


class ScriptedLearner:
    def __init__(self):
        self.fits = []

    def fit(self, X, y):
        self.fits.append(len(y))
        return ScriptedModel()


def scripted_stream(correct_flags, start=0):
    """Samples whose label makes ScriptedModel right exactly where flags are 1."""
    flags = np.asarray(correct_flags, dtype=np.int64)
    X = np.arange(len(flags), dtype=np.float64)[:, None]
    return StreamSource(X, 1 - flags, indices=np.arange(start, start + len(flags)))


@pytest.fixture(scope="session")
def sudden_stream():
    spec = SyntheticDriftSpec("sudden", [5000], noise_rate=0.05, seed=1)
    return generate_synthetic(spec, 20000)


@pytest.fixture(scope="session")
def concept_a_model():
    return fit_arrays(*concept_a_data(2000), SMALL_PARAMS)


def concept_a_data(n, seed=99, noise=0.0):
    """``n`` samples of concept 0 only (the change point sits past the end)."""
    src = generate_synthetic(SyntheticDriftSpec("sudden", [n], noise_rate=noise, seed=seed), n + 1)[:n]
    return src.X, src.y


def sample(i, x, y):
    return LabeledSample(i, np.asarray(x, dtype=np.float64), int(y))
