"""Prequential (test-then-train) evaluation, metrics and report emission."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import numpy as np

REPORT_VERSION = 1
CURVE_HEADER = ("index", "window_accuracy")
TIMING_KEYS = ("timing",)

# memory proxy record sizes, in bytes
NODE_RECORD_BYTES = 40  # feature i64, threshold f64, left i64, right i64, value f64
SAMPLE_OVERHEAD_BYTES = 16  # index + label per buffered sample
FLAG_BYTES = 1
ENGINE_OVERHEAD_BYTES = 256


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_arrays(cls, y_true, y_pred) -> "ConfusionCounts":
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        return cls(
            tp=int(np.sum(y_true & y_pred)),
            fp=int(np.sum(~y_true & y_pred)),
            tn=int(np.sum(~y_true & ~y_pred)),
            fn=int(np.sum(y_true & ~y_pred)),
        )


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "undefined": list(self.undefined),
        }

    def as_percent_row(self) -> dict:
        return {k: round(100.0 * getattr(self, k), 2) for k in ("accuracy", "precision", "recall", "f1")}


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    """Accuracy, precision, recall and F1 as fractions.

    Ratios with a zero denominator are reported as 0 and named in
    ``undefined``.
    """
    if counts.total < 1:
        raise ValueError("compute_metrics needs at least one scored sample")
    undefined = []
    accuracy = (counts.tp + counts.tn) / counts.total
    if counts.tp + counts.fp:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if counts.tp + counts.fn:
        recall = counts.tp / (counts.tp + counts.fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append("f1")
    return Metrics(accuracy, precision, recall, f1, tuple(undefined))


class Pipeline(Protocol):
    """Anything that can be scored test-then-train.

    ``predict`` only ever sees features; the label is revealed afterwards
    through ``learn``, which returns a (possibly empty) list of events.
    """

    name: str

    def predict(self, features) -> int: ...

    def learn(self, sample, prediction: int) -> list: ...

    def memory_proxy(self) -> int: ...


@dataclass
class EvaluationReport:
    method: str
    indices: np.ndarray
    labels: np.ndarray
    predictions: np.ndarray
    window_acc_series: list[tuple[int, float]] = field(default_factory=list)
    events: list[Any] = field(default_factory=list)
    metrics: Metrics | None = None
    counts: ConfusionCounts | None = None
    avg_test_time_ms: float = 0.0
    amortized_time_ms: float = 0.0
    learn_time_s: float = 0.0
    memory_proxy: int = 0
    peak_live_samples: int = 0
    run_meta: dict = field(default_factory=dict)
    partial: bool = False
    error: str | None = None

    @property
    def per_instance_correct(self) -> np.ndarray:
        return self.labels == self.predictions

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy if self.metrics else 0.0

    def accuracy_between(self, lo: int, hi: int) -> float:
        """Prequential accuracy over samples with ``lo <= index < hi``."""
        sel = (self.indices >= lo) & (self.indices < hi)
        return float(self.per_instance_correct[sel].mean())

    def event_kinds(self) -> list[str]:
        return [_event_kind(e) for e in self.events]

    def recompute_metrics(self) -> Metrics:
        return compute_metrics(ConfusionCounts.from_arrays(self.labels, self.predictions))

    def summary(self) -> dict:
        kinds: dict[str, int] = {}
        for k in self.event_kinds():
            kinds[k] = kinds.get(k, 0) + 1
        return {
            "report_version": REPORT_VERSION,
            "method": self.method,
            "n_samples": int(len(self.labels)),
            "metrics": self.metrics.as_dict() if self.metrics else None,
            "confusion": vars(self.counts) if self.counts else None,
            "table_row": self.metrics.as_percent_row() if self.metrics else None,
            "memory_proxy_bytes": int(self.memory_proxy),
            "peak_live_samples": int(self.peak_live_samples),
            "event_counts": dict(sorted(kinds.items())),
            "partial": self.partial,
            "error": self.error,
            "run_meta": self.run_meta,
            "timing": {
                "avg_test_time_ms": self.avg_test_time_ms,
                "amortized_time_ms": self.amortized_time_ms,
                "learn_time_s": self.learn_time_s,
            },
        }


def _event_kind(e) -> str:
    kind = getattr(e, "kind", None)
    if kind is None:
        kind = getattr(e, "level", e)
    return getattr(kind, "value", str(kind))


def _event_record(e) -> dict:
    if hasattr(e, "to_record"):
        return e.to_record()
    return {"kind": _event_kind(e), "index": int(getattr(e, "index", -1))}


def prequential_evaluate(pipeline, stream, *, run_meta: dict | None = None) -> EvaluationReport:
    """Score every sample before revealing its label to the pipeline.

    Only the ``predict`` call is timed for the average test time; the time
    spent in ``learn`` (detection, retraining) is reported separately and in
    the amortised per-instance figure.
    """
    n = len(stream)
    if n == 0:
        raise ValueError("cannot evaluate an empty stream")
    indices = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int8)
    preds = np.empty(n, dtype=np.int8)
    events: list = []
    series: list[tuple[int, float]] = []
    test_time = 0.0
    learn_time = 0.0
    peak = 0
    done = 0
    error = None
    clock = time.perf_counter
    try:
        for k, sample in enumerate(stream):
            t0 = clock()
            pred = pipeline.predict(sample.features)
            t1 = clock()
            new_events = pipeline.learn(sample, pred)
            t2 = clock()
            test_time += t1 - t0
            learn_time += t2 - t1
            indices[k] = sample.index
            labels[k] = sample.label
            preds[k] = pred
            if new_events:
                events.extend(new_events)
            acc = getattr(pipeline, "last_window_accuracy", None)
            if acc is not None:
                series.append((sample.index, acc))
            live = getattr(pipeline, "live_samples", None)
            if live is not None:
                peak = max(peak, live)
            done = k + 1
    except Exception as exc:  # abort with a partial report
        error = f"{type(exc).__name__}: {exc}"
    report = EvaluationReport(
        method=getattr(pipeline, "name", type(pipeline).__name__),
        indices=indices[:done],
        labels=labels[:done],
        predictions=preds[:done],
        window_acc_series=series,
        events=events,
        avg_test_time_ms=1e3 * test_time / max(done, 1),
        amortized_time_ms=1e3 * (test_time + learn_time) / max(done, 1),
        learn_time_s=learn_time,
        memory_proxy=memory_proxy(pipeline),
        peak_live_samples=peak,
        run_meta=dict(run_meta or {}),
        partial=error is not None,
        error=error,
    )
    if done:
        report.counts = ConfusionCounts.from_arrays(report.labels, report.predictions)
        report.metrics = compute_metrics(report.counts)
    return report


def model_bytes(model) -> int:
    return NODE_RECORD_BYTES * int(getattr(model, "n_nodes", 0)) if model is not None else 0


def buffer_bytes(n_samples: int, width: int) -> int:
    return n_samples * (8 * width + SAMPLE_OVERHEAD_BYTES)


def memory_proxy(pipeline) -> int:
    """Deterministic structural size estimate of a pipeline, in bytes.

    Counts tree nodes and buffered samples only; this is a proxy that is
    reproducible across machines, not a resident-set measurement.
    """
    fn = getattr(pipeline, "memory_proxy", None)
    if callable(fn):
        return int(fn())
    return ENGINE_OVERHEAD_BYTES + model_bytes(getattr(pipeline, "model", None))


# --------------------------------------------------------------------------- #
# emission
# --------------------------------------------------------------------------- #


def mask_timing(summary: dict) -> dict:
    out = dict(summary)
    for key in TIMING_KEYS:
        if key in out:
            out[key] = {k: None for k in out[key]}
    return out


def summary_json(report: EvaluationReport, *, mask: bool = False) -> str:
    s = report.summary()
    if mask:
        s = mask_timing(s)
    return json.dumps(s, sort_keys=True, indent=2) + "\n"


def curve_csv(report: EvaluationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for idx, acc in report.window_acc_series:
        w.writerow((idx, repr(float(acc))))
    return buf.getvalue()


def events_jsonl(report: EvaluationReport) -> str:
    return "".join(json.dumps(_event_record(e), sort_keys=True) + "\n" for e in report.events)


def emit_report(report: EvaluationReport, directory, formats=("json", "csv"), *, prefix: str = "",
                mask: bool = False) -> list[Path]:
    """Write summary JSON, events JSON-lines and the window-accuracy CSV.

    ``json`` covers the summary and events; ``csv`` the accuracy curve.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        p = directory / f"{prefix}summary.json"
        p.write_text(summary_json(report, mask=mask), encoding="utf-8")
        written.append(p)
        p = directory / f"{prefix}events.jsonl"
        p.write_text(events_jsonl(report), encoding="utf-8")
        written.append(p)
    if "csv" in formats:
        p = directory / f"{prefix}curve.csv"
        p.write_text(curve_csv(report), encoding="utf-8")
        written.append(p)
    unknown = set(formats) - {"json", "csv"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    return written
