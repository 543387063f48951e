"""Reference drift detectors (DDM, EDDM, ADWIN) and a detect-and-retrain
pipeline that plugs them into the same prequential harness as OASW."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .evaluation import ENGINE_OVERHEAD_BYTES, FLAG_BYTES, buffer_bytes, model_bytes, prequential_evaluate
from .gbdt import GbdtLearner


class Level(str, enum.Enum):
    IN_CONTROL = "InControl"
    WARNING = "Warning"
    DRIFT = "Drift"


@dataclass(frozen=True)
class DriftSignal:
    level: Level
    index: int

    def to_record(self) -> dict:
        return {"kind": self.level.value, "index": self.index}


class DDM:
    """Drift Detection Method: running error rate p with std s = sqrt(p(1-p)/n).

    Warning when ``p + s >= p_min + warning_level * s_min``, drift when
    ``p + s > p_min + drift_level * s_min``; the minimum of ``p + s`` is tracked
    once ``min_instances`` samples have been seen. The statistics reset after
    a drift.

    The minimum is only registered after the first error: with zero observed
    errors ``s_min`` would be 0 and the first error would signal drift.
    """

    def __init__(self, min_instances: int = 30, warning_level: float = 2.0, drift_level: float = 3.0):
        self.min_instances = min_instances
        self.warning_level = warning_level
        self.drift_level = drift_level
        self.reset()

    def reset(self):
        self.n = 0
        self.p = 1.0
        self.s = 0.0
        self.p_min = math.inf
        self.s_min = math.inf
        self.ps_min = math.inf
        self.seen_error = False

    def update(self, error) -> Level:
        error = int(bool(error))
        self.n += 1
        self.p += (error - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)
        self.seen_error |= bool(error)
        if self.n < self.min_instances or not self.seen_error:
            return Level.IN_CONTROL
        ps = self.p + self.s
        if ps <= self.ps_min:
            self.p_min, self.s_min, self.ps_min = self.p, self.s, ps
        if ps > self.p_min + self.drift_level * self.s_min:
            self.reset()
            return Level.DRIFT
        if ps >= self.p_min + self.warning_level * self.s_min:
            return Level.WARNING
        return Level.IN_CONTROL


class EDDM:
    """Early Drift Detection Method on the distance between consecutive errors.

    Tracks the running mean ``m`` and std ``s`` of inter-error gaps and the
    maximum of ``m + 2s``; after ``min_errors`` errors, the ratio
    ``(m + 2s) / max`` below ``warning_ratio`` is a warning and below
    ``drift_ratio`` a drift. Statistics only move on errors, so the last level
    is held between them.
    """

    def __init__(self, min_errors: int = 30, warning_ratio: float = 0.95, drift_ratio: float = 0.90):
        self.min_errors = min_errors
        self.warning_ratio = warning_ratio
        self.drift_ratio = drift_ratio
        self.reset()

    def reset(self):
        self.n = 0
        self.n_errors = 0
        self.last_error = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m2s_max = 0.0
        self.level = Level.IN_CONTROL

    def update(self, error) -> Level:
        self.n += 1
        if not error:
            return self.level
        gap = self.n - self.last_error
        self.last_error = self.n
        self.n_errors += 1
        # Welford running mean/variance of the gaps
        delta = gap - self.mean
        self.mean += delta / self.n_errors
        self.m2 += delta * (gap - self.mean)
        std = math.sqrt(self.m2 / self.n_errors)
        m2s = self.mean + 2.0 * std
        if m2s > self.m2s_max:
            self.m2s_max = m2s
        if self.n_errors < self.min_errors:
            self.level = Level.IN_CONTROL
            return self.level
        ratio = m2s / self.m2s_max
        if ratio < self.drift_ratio:
            self.reset()
            return Level.DRIFT
        self.level = Level.WARNING if ratio < self.warning_ratio else Level.IN_CONTROL
        return self.level


class ADWIN:
    """Adaptive windowing over values in [0, 1].

    The window is compressed into an exponential histogram: row ``i`` holds
    buckets of ``2**i`` values each (total and variance), at most
    ``max_buckets`` per row. Every ``clock`` inserts all bucket-boundary splits
    are tested against a variance-aware Hoeffding bound; on a violation the
    oldest bucket is dropped and the test repeats.
    """

    def __init__(self, delta: float = 0.002, max_buckets: int = 5, min_window: int = 5,
                 clock: int = 32, grace_period: int = 10):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        self.delta = delta
        self.max_buckets = max_buckets
        self.min_window = min_window
        self.clock = clock
        self.grace_period = grace_period
        self.rows: list[deque] = []  # rows[i]: deque of [total, variance], oldest first
        self.width = 0
        self.total = 0.0
        self.variance = 0.0
        self.n_seen = 0
        self.n_dropped = 0

    @property
    def mean(self) -> float:
        return self.total / self.width if self.width else 0.0

    @property
    def n_buckets(self) -> int:
        return sum(len(r) for r in self.rows)

    def update(self, value) -> Level:
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"ADWIN input must lie in [0, 1], got {value}")
        self._insert(value)
        self.n_seen += 1
        if self.n_seen % self.clock == 0 and self.width > self.grace_period and self._detect():
            return Level.DRIFT
        return Level.IN_CONTROL

    def _insert(self, value):
        if self.width > 0:
            mean = self.total / self.width
            self.variance += self.width * (value - mean) ** 2 / (self.width + 1)
        self.width += 1
        self.total += value
        if not self.rows:
            self.rows.append(deque())
        self.rows[0].append([value, 0.0])
        self._compress()

    def _compress(self):
        i = 0
        while i < len(self.rows) and len(self.rows[i]) > self.max_buckets:
            row = self.rows[i]
            t1, v1 = row.popleft()
            t2, v2 = row.popleft()
            size = 2 ** i
            u1, u2 = t1 / size, t2 / size
            merged = [t1 + t2, v1 + v2 + size * size * (u1 - u2) ** 2 / (2 * size)]
            if i + 1 == len(self.rows):
                self.rows.append(deque())
            self.rows[i + 1].append(merged)
            i += 1

    def _drop_oldest(self):
        i = len(self.rows) - 1
        total, var = self.rows[i].popleft()
        size = 2 ** i
        self.width -= size
        self.total -= total
        if self.width > 0:
            u1 = total / size
            self.variance -= var + size * self.width * (u1 - self.total / self.width) ** 2 / (size + self.width)
            self.variance = max(self.variance, 0.0)
        else:
            self.variance = 0.0
        self.n_dropped += size
        while self.rows and not self.rows[-1]:
            self.rows.pop()

    def _buckets_oldest_first(self):
        for i in range(len(self.rows) - 1, -1, -1):
            size = 2 ** i
            for total, _ in self.rows[i]:
                yield size, total

    def _cut(self, n0, n1, u0, u1) -> bool:
        v = self.variance / self.width
        dd = math.log(2.0 * math.log(self.width) / self.delta)
        m = 1.0 / (n0 - self.min_window + 1) + 1.0 / (n1 - self.min_window + 1)
        eps = math.sqrt(2.0 * m * v * dd) + 2.0 / 3.0 * dd * m
        return abs(u0 / n0 - u1 / n1) > eps

    def _detect(self) -> bool:
        detected = False
        reduce = True
        while reduce and self.width > self.min_window * 2:
            reduce = False
            n0, s0 = 0, 0.0
            for size, total in self._buckets_oldest_first():
                n0 += size
                s0 += total
                n1 = self.width - n0
                if n1 < self.min_window:
                    break
                if n0 < self.min_window:
                    continue
                if self._cut(n0, n1, s0, self.total - s0):
                    self._drop_oldest()
                    detected = reduce = True
                    break
        return detected


DETECTORS = {"ddm": DDM, "eddm": EDDM, "adwin": ADWIN}


def make_detector(name: str, **kwargs):
    try:
        return DETECTORS[name.lower()](**kwargs)
    except KeyError:
        raise ValueError(f"unknown detector {name!r}; valid names: {', '.join(sorted(DETECTORS))}") from None


class DetectorPipeline:
    """Prequential loop that refits the classifier when a detector fires.

    DDM/EDDM receive the error bit, ADWIN the correctness bit. On ``Drift``
    the model is refit from scratch on the most recent ``retrain_window``
    samples and the detector continues (DDM/EDDM reset themselves; ADWIN has
    already shrunk its window).
    """

    def __init__(self, model, detector, retrain_window: int = 1000, learner=None, *, name: str | None = None,
                 width: int | None = None):
        self.model = model
        self.detector = detector if not isinstance(detector, str) else make_detector(detector)
        self.retrain_window = retrain_window
        self.learner = learner if learner is not None else GbdtLearner(model.params)
        self.name = name or type(self.detector).__name__.lower()
        self.width = width if width is not None else getattr(model, "schema_width", 0)
        self._buf_x: deque = deque(maxlen=retrain_window)
        self._buf_y: deque = deque(maxlen=retrain_window)
        self.n_retrains = 0
        self.last_window_accuracy = None

    @property
    def live_samples(self) -> int:
        return len(self._buf_y)

    def predict(self, features) -> int:
        return int(self.model.predict_one(features)[0])

    def learn(self, sample, prediction: int) -> list[DriftSignal]:
        self._buf_x.append(np.asarray(sample.features, dtype=np.float64))
        self._buf_y.append(int(sample.label))
        correct = int(prediction == sample.label)
        value = correct if isinstance(self.detector, ADWIN) else 1 - correct
        level = self.detector.update(value)
        if level == Level.IN_CONTROL:
            return []
        if level == Level.DRIFT:
            self.model = self.learner.fit(np.vstack(self._buf_x), np.asarray(self._buf_y))
            self.n_retrains += 1
        return [DriftSignal(level, sample.index)]

    def memory_proxy(self) -> int:
        extra = FLAG_BYTES * getattr(self.detector, "n_buckets", 0) * 16
        return ENGINE_OVERHEAD_BYTES + model_bytes(self.model) + buffer_bytes(len(self._buf_y), self.width) + extra


class StaticPipeline:
    """Never-adapt arm: the offline model scores the whole stream.

    With ``keep_history`` every sample is also retained, which is the memory
    footprint of a learner that never discards data.
    """

    def __init__(self, model, *, keep_history: bool = False, name: str = "offline", width: int | None = None):
        self.model = model
        self.keep_history = keep_history
        self.name = name
        self.width = width if width is not None else getattr(model, "schema_width", 0)
        self.n_history = 0
        self.last_window_accuracy = None

    @property
    def live_samples(self) -> int:
        return self.n_history

    def predict(self, features) -> int:
        return int(self.model.predict_one(features)[0])

    def learn(self, sample, prediction: int) -> list:
        if self.keep_history:
            self.n_history += 1
        return []

    def memory_proxy(self) -> int:
        return ENGINE_OVERHEAD_BYTES + model_bytes(self.model) + buffer_bytes(self.n_history, self.width)


def detect_and_retrain(stream, offline_model, detector="ddm", retrain_window: int = 1000, learner=None,
                       *, run_meta: dict | None = None):
    pipeline = DetectorPipeline(offline_model, detector, retrain_window, learner,
                                width=getattr(stream, "width", None))
    meta = {"detector": pipeline.name, "retrain_window": retrain_window}
    meta.update(run_meta or {})
    report = prequential_evaluate(pipeline, stream, run_meta=meta)
    if report.error:
        raise RuntimeError(report.error)
    return report


def no_adaptation(stream, offline_model, *, run_meta: dict | None = None):
    report = prequential_evaluate(StaticPipeline(offline_model, width=getattr(stream, "width", None)),
                                  stream, run_meta=run_meta)
    if report.error:
        raise RuntimeError(report.error)
    return report
