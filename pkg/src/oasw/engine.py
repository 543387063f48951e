"""OASW drift adaptation: sliding-window accuracy tracking with an adaptive
window of new-concept samples and retrain-on-drift."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .evaluation import (
    ENGINE_OVERHEAD_BYTES,
    FLAG_BYTES,
    EvaluationReport,
    buffer_bytes,
    model_bytes,
    prequential_evaluate,
)
from .gbdt import GbdtLearner


class State(enum.IntEnum):
    NORMAL = 0
    WARNING = 1
    DRIFT = 2


class EventKind(str, enum.Enum):
    WARNING_ENTERED = "WarningEntered"
    FALSE_ALARM = "FalseAlarm"
    DRIFT_DETECTED = "DriftDetected"
    RETRAINED_ON_DRIFT = "RetrainedOnDrift"
    STABILIZATION_RETRAIN = "StabilizationRetrain"
    WINDOW_RELEASED = "WindowReleased"


@dataclass(frozen=True)
class OaswEvent:
    kind: EventKind
    index: int
    window_acc_now: float
    window_acc_ref: float

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "index": self.index,
            "acc_now": self.window_acc_now,
            "acc_ref": self.window_acc_ref,
        }


@dataclass(frozen=True)
class OaswParams:
    alpha: float = 0.98
    beta: float = 0.95
    t: int = 300
    t_prime_max: int = 1000

    def __post_init__(self):
        if not 0.0 < self.beta < self.alpha < 1.0:
            raise ValueError(f"need 0 < beta < alpha < 1, got alpha={self.alpha}, beta={self.beta}")
        if self.t < 2:
            raise ValueError("t must be >= 2")
        if self.t_prime_max < self.t:
            raise ValueError("t_prime_max must be >= t")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "t": self.t, "t_prime_max": self.t_prime_max}


class CorrectnessRing:
    """Fixed-capacity history of prediction-correct flags.

    Stores running correct-counts so any window of up to ``capacity`` flags
    ending at a retained position costs O(1). Positions are 0-based flag
    numbers; the ring never rewrites a stored flag.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        # cum[k % (capacity + 1)] = correct flags among the first k
        self._cum = np.zeros(capacity + 1, dtype=np.int64)
        self._flags = np.zeros(capacity, dtype=np.int8)
        self.count = 0

    def append(self, correct: bool) -> None:
        c = self._cum[self.count % (self.capacity + 1)] + int(correct)
        self._flags[self.count % self.capacity] = int(correct)
        self.count += 1
        self._cum[self.count % (self.capacity + 1)] = c

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def window_accuracy(self, end_index: int, t: int) -> float:
        """Mean of the ``t`` flags at positions ``(end_index - t, end_index]``."""
        hi = end_index + 1
        lo = hi - t
        if t < 1 or lo < 0 or hi > self.count or self.count - lo > self.capacity:
            raise IndexError(f"window ({end_index - t}, {end_index}] is not held by the ring")
        m = self.capacity + 1
        return int(self._cum[hi % m] - self._cum[lo % m]) / t

    def flags(self) -> np.ndarray:
        """Retained flags, oldest first."""
        n = len(self)
        start = self.count - n
        return np.array([self._flags[(start + k) % self.capacity] for k in range(n)], dtype=np.int8)


def window_accuracy(ring, end_index: int, t: int) -> float:
    """Window accuracy over a ring or a flat sequence of flags."""
    if isinstance(ring, CorrectnessRing):
        return ring.window_accuracy(end_index, t)
    flags = np.asarray(ring)
    if t < 1 or end_index + 1 - t < 0 or end_index >= len(flags):
        raise IndexError("insufficient history")
    return int(flags[end_index + 1 - t:end_index + 1].sum()) / t


class OaswEngine:
    """One prequential OASW run around a retrainable classifier.

    ``predict`` scores features with the current model; ``learn`` reveals the
    label, appends the correctness flag and runs one iteration of the
    Normal/Warning/Drift state machine, returning the events it produced.

    Detection is suppressed until ``2 t`` flags precede the current sample.
    A drift retrain waits until the adaptive window holds ``min_retrain``
    samples (``max(2 * min_data_in_leaf, 10)`` for the GBDT learner); it is
    reported as ``RetrainedOnDrift`` when it happens.
    """

    name = "oasw"

    def __init__(self, model, params: OaswParams, learner=None, *, width: int | None = None,
                 min_retrain: int | None = None):
        self.model = model
        self.params = params
        self.learner = learner if learner is not None else GbdtLearner(model.params)
        self.width = width if width is not None else getattr(model, "schema_width", None)
        if min_retrain is None:
            lp = getattr(self.learner, "params", None)
            min_retrain = max(2 * lp.min_data_in_leaf, 10) if lp is not None else 10
        self.min_retrain = min(min_retrain, params.t_prime_max)
        self.ring = CorrectnessRing(2 * params.t)
        self.state = State.NORMAL
        self._wx: list[np.ndarray] = []
        self._wy: list[int] = []
        self.drift_pos: int | None = None  # flag position f
        self.drift_index: int | None = None
        self.baseline_acc: float | None = None
        self.retrain_pending = False
        self.last_window_accuracy: float | None = None
        self.n_retrains = 0
        self.last_retrain_size = 0
        self.retrain_sizes: list[int] = []

    # ------------------------------------------------------------ helpers --

    @property
    def window_size(self) -> int:
        return len(self._wy)

    @property
    def live_samples(self) -> int:
        """Buffered samples plus retained correctness flags."""
        return len(self._wy) + len(self.ring)

    def _collect(self, sample):
        self._wx.append(np.asarray(sample.features, dtype=np.float64))
        self._wy.append(int(sample.label))

    def _release(self):
        self._wx.clear()
        self._wy.clear()

    def _retrain(self):
        X = np.vstack(self._wx)
        y = np.asarray(self._wy)
        self.model = self.learner.fit(X, y)
        self.n_retrains += 1
        self.last_retrain_size = len(y)
        self.retrain_sizes.append(len(y))

    def memory_proxy(self) -> int:
        width = self.width or 0
        return (ENGINE_OVERHEAD_BYTES + model_bytes(self.model)
                + buffer_bytes(len(self._wy), width) + FLAG_BYTES * len(self.ring))

    # --------------------------------------------------------------- step --

    def predict(self, features) -> int:
        out = self.model.predict_one(features)
        return int(out[0]) if isinstance(out, tuple) else int(out)

    def learn(self, sample, prediction: int) -> list[OaswEvent]:
        p = self.params
        t = p.t
        ring = self.ring
        ring.append(prediction == sample.label)
        pos = ring.count - 1
        self.last_window_accuracy = None
        if pos < 2 * t:
            return []
        acc = ring.window_accuracy(pos, t)
        ref = ring.window_accuracy(pos - t, t)
        self.last_window_accuracy = acc
        events: list[OaswEvent] = []
        idx = sample.index

        def emit(kind, acc_ref=ref):
            events.append(OaswEvent(kind, idx, acc, acc_ref))

        collected = False
        if self.state == State.NORMAL and acc < p.alpha * ref:
            self._collect(sample)
            collected = True
            self.state = State.WARNING
            emit(EventKind.WARNING_ENTERED)

        if self.state == State.WARNING:
            if acc < p.beta * ref:
                self.state = State.DRIFT
                self.drift_pos = pos
                self.drift_index = idx
                self.baseline_acc = None
                emit(EventKind.DRIFT_DETECTED)
                if self.window_size >= self.min_retrain:
                    self._retrain()
                    emit(EventKind.RETRAINED_ON_DRIFT)
                else:
                    self.retrain_pending = True
            elif acc >= p.alpha * ref or self.window_size >= p.t_prime_max:
                self._release()
                self.state = State.NORMAL
                emit(EventKind.FALSE_ALARM)
                emit(EventKind.WINDOW_RELEASED)
            elif not collected:
                self._collect(sample)
                collected = True

        if self.state == State.DRIFT:
            if pos == self.drift_pos + t:
                self.baseline_acc = acc
            base = self.baseline_acc
            if (base is not None and acc < p.alpha * base) or self.window_size >= p.t_prime_max:
                self._retrain()
                self.retrain_pending = False
                self._release()
                self.state = State.NORMAL
                emit(EventKind.STABILIZATION_RETRAIN, base if base is not None else ref)
                emit(EventKind.WINDOW_RELEASED, base if base is not None else ref)
            else:
                if not collected:
                    self._collect(sample)
                if self.retrain_pending and self.window_size >= self.min_retrain:
                    self._retrain()
                    self.retrain_pending = False
                    emit(EventKind.RETRAINED_ON_DRIFT)
        return events

    def step(self, sample) -> tuple[int, list[OaswEvent]]:
        pred = self.predict(sample.features)
        return pred, self.learn(sample, pred)


@dataclass
class RunResult:
    avg_accuracy: float
    trace: EvaluationReport
    engine: OaswEngine = field(repr=False)


def run_stream(model, stream, params: OaswParams, learner=None, *, run_meta: dict | None = None) -> RunResult:
    """Fold the OASW step over a whole stream.

    ``avg_accuracy`` is the mean of every correctness flag, warm-up included.
    """
    if len(stream) == 0:
        raise ValueError("cannot run OASW on an empty stream")
    engine = OaswEngine(model, params, learner, width=getattr(stream, "width", None))
    meta = {"oasw": params.to_dict()}
    meta.update(run_meta or {})
    report = prequential_evaluate(engine, stream, run_meta=meta)
    if report.error:
        raise RuntimeError(report.error)
    return RunResult(report.accuracy, report, engine)
