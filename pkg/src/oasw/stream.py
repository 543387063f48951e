"""Labeled stream data model, CSV ingestion and synthetic drift streams."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class StreamError(Exception):
    """Base class for data ingestion problems."""


class SchemaError(StreamError):
    pass


class RowError(StreamError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyStreamError(StreamError):
    pass


class SpecError(StreamError):
    """Inconsistent synthetic stream specification."""


@dataclass(frozen=True)
class LabeledSample:
    index: int
    features: np.ndarray
    label: int


class StreamSource:
    """Replayable, in-order sequence of labeled samples.

    Backed by two arrays; ``indices`` carries each sample's ordinal position in
    the original stream so that splits keep their global numbering. Iterating
    always starts from the beginning; ``cursor`` tracks the active replay.
    """

    def __init__(self, X, y, feature_names: Sequence[str] | None = None, indices=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int8)
        if X.ndim != 2:
            raise SchemaError("features must be a 2-D array")
        if len(X) != len(y):
            raise SchemaError("feature and label counts differ")
        if y.size and not np.isin(y, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(X.shape[1])]
        if len(feature_names) != X.shape[1]:
            raise SchemaError("feature_names length does not match feature count")
        self.X = X
        self.y = y
        self.feature_names = list(feature_names)
        self.indices = np.arange(len(y), dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
        self.cursor = 0

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[LabeledSample]:
        self.cursor = 0
        X, y, idx = self.X, self.y, self.indices
        for k in range(len(y)):
            self.cursor = k + 1
            yield LabeledSample(int(idx[k]), X[k], int(y[k]))

    def __getitem__(self, item) -> "StreamSource":
        if not isinstance(item, slice):
            raise TypeError("StreamSource supports slice indexing only")
        return StreamSource(self.X[item], self.y[item], self.feature_names, self.indices[item])

    def clone(self) -> "StreamSource":
        """Independent replay handle sharing the (read-only) arrays."""
        return StreamSource(self.X, self.y, self.feature_names, self.indices)

    def samples(self) -> list[LabeledSample]:
        return list(self)

    def reindexed(self) -> "StreamSource":
        return StreamSource(self.X, self.y, self.feature_names)

    def __repr__(self) -> str:
        return f"StreamSource(length={len(self)}, width={self.width})"


@dataclass
class HoldoutSplit:
    offline: StreamSource
    online: StreamSource
    fraction: float


# --------------------------------------------------------------------------- #
# CSV ingestion
# --------------------------------------------------------------------------- #


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_csv(path: Path, column_names=None):
    """Yield ``(line_number, fields)``; the header comes first with line 0.

    Blank lines and leading ``#`` comment lines are skipped. Quoted fields may
    not span lines. With ``column_names`` the file has no header row and the
    given names are yielded as the header instead.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        numbered = [(n, line) for n, line in enumerate(fh, start=1) if line.strip()]
    body = iter(numbered)
    if column_names is not None:
        body = iter([(n, line) for n, line in numbered if not line.startswith("#")])
        if not numbered:
            raise EmptyStreamError(f"{path}: empty file")
        yield 0, list(column_names)
        for lineno, line in body:
            yield lineno, next(csv.reader([line]))
        return
    for lineno, line in body:
        if not line.startswith("#"):
            yield 0, [h.strip() for h in next(csv.reader([line]))]
            break
    else:
        raise EmptyStreamError(f"{path}: empty file")
    for lineno, line in body:
        yield lineno, next(csv.reader([line]))


class _Encoder:
    """Shared column typing and ordinal encoding across one or more files."""

    def __init__(self, header, label_column, positive_labels, negative_labels, categorical, drop=()):
        if label_column not in header:
            raise SchemaError(f"label column {label_column!r} not found; columns are {header}")
        missing = set(drop or ()) - set(header)
        if missing:
            raise SchemaError(f"columns to drop not found: {sorted(missing)}")
        self.header = header
        self.label_pos = header.index(label_column)
        dropped = {header.index(c) for c in drop or ()}
        self.feature_cols = [j for j in range(len(header)) if j != self.label_pos and j not in dropped]
        self.positive = set(positive_labels or ())
        self.negative = set(negative_labels or ())
        if not self.positive and not self.negative:
            raise SchemaError("one of positive_labels / negative_labels is required")
        self.categorical = set(categorical or ())
        unknown = self.categorical - set(header)
        if unknown:
            raise SchemaError(f"categorical columns not found: {sorted(unknown)}")
        self.kinds: dict[int, str] | None = None
        self.codes: dict[int, dict[str, int]] = {}

    def encode(self, lineno, row):
        if len(row) != len(self.header):
            raise RowError(lineno, f"expected {len(self.header)} fields, got {len(row)}")
        row = [v.strip() for v in row]
        if self.kinds is None:
            self.kinds = {}
            for j in self.feature_cols:
                named_cat = self.header[j] in self.categorical
                self.kinds[j] = "cat" if named_cat or not _is_number(row[j]) else "num"
        out = np.empty(len(self.feature_cols))
        for k, j in enumerate(self.feature_cols):
            value = row[j]
            if self.kinds[j] == "num":
                try:
                    out[k] = float(value)
                except ValueError:
                    raise RowError(lineno, f"column {self.header[j]!r}: cannot parse {value!r} as a number") from None
                if not math.isfinite(out[k]):
                    raise RowError(lineno, f"column {self.header[j]!r}: non-finite value {value!r}")
            else:
                table = self.codes.setdefault(j, {})
                out[k] = table.setdefault(value, len(table))
        raw = row[self.label_pos]
        if self.positive:
            label = 1 if raw in self.positive else 0
        else:
            label = 0 if raw in self.negative else 1
        return out, label

    @property
    def feature_names(self):
        return [self.header[j] for j in self.feature_cols]


def _load_rows(path, encoder: _Encoder | None, label_column, positive_labels, negative_labels, categorical,
               column_names=None, drop=()):
    path = Path(path)
    rows = _read_csv(path, column_names)
    _, header = next(rows)
    if encoder is None:
        encoder = _Encoder(header, label_column, positive_labels, negative_labels, categorical, drop)
    elif header != encoder.header:
        raise SchemaError(f"{path}: header differs from the first file")
    feats, labels = [], []
    for lineno, row in rows:
        try:
            x, label = encoder.encode(lineno, row)
        except RowError as exc:
            raise RowError(exc.line, f"{path}: {exc.args[0].split(': ', 1)[1]}") from None
        feats.append(x)
        labels.append(label)
    if not feats:
        raise EmptyStreamError(f"{path}: no data rows")
    return encoder, np.vstack(feats), np.asarray(labels, dtype=np.int8)


def load_csv(path, label_column: str, positive_labels: Iterable[str] = (), *,
             negative_labels: Iterable[str] = (), categorical: Iterable[str] = (),
             column_names: Sequence[str] | None = None, drop_columns: Iterable[str] = ()) -> StreamSource:
    """Read a CSV into a stream.

    Columns whose first value is non-numeric (or that are listed in
    ``categorical``) are ordinal-encoded in first-seen order. A row is labelled
    1 when its raw label is in ``positive_labels``; alternatively pass
    ``negative_labels`` to label everything else as 1. Headerless files take
    their names from ``column_names``; ``drop_columns`` are ignored entirely.
    """
    encoder, X, y = _load_rows(path, None, label_column, positive_labels, negative_labels, categorical,
                               column_names, tuple(drop_columns))
    return StreamSource(X, y, encoder.feature_names)


def load_csv_concat(first, second, label_column: str, positive_labels: Iterable[str] = (), *,
                    first_tail_fraction: float = 1.0, negative_labels: Iterable[str] = (),
                    categorical: Iterable[str] = (), column_names: Sequence[str] | None = None,
                    drop_columns: Iterable[str] = ()) -> StreamSource:
    """Tail of ``first`` followed by all of ``second``, encoded with one schema.

    Mirrors the NSL-KDD evaluation stream: last 10% of the training file plus
    the full test file.
    """
    if not 0.0 < first_tail_fraction <= 1.0:
        raise ValueError("first_tail_fraction must be in (0, 1]")
    drop = tuple(drop_columns)
    encoder, X1, y1 = _load_rows(first, None, label_column, positive_labels, negative_labels, categorical,
                                 column_names, drop)
    _, X2, y2 = _load_rows(second, encoder, label_column, positive_labels, negative_labels, categorical,
                           column_names, drop)
    keep = _ceil_fraction(first_tail_fraction, len(y1))
    X = np.vstack([X1[len(y1) - keep:], X2])
    y = np.concatenate([y1[len(y1) - keep:], y2])
    return StreamSource(X, y, encoder.feature_names)


def _ceil_fraction(fraction: float, n: int) -> int:
    # round first so that 0.1 * 35140 == 3514.0000000000005 still yields 3514
    return int(math.ceil(round(fraction * n, 9)))


# --------------------------------------------------------------------------- #
# reductions and splits
# --------------------------------------------------------------------------- #


def decimate(source: StreamSource, keep_every: int, seed: int = 0) -> StreamSource:
    """Keep one uniformly chosen sample from each block of ``keep_every``."""
    if keep_every < 1:
        raise ValueError("keep_every must be >= 1")
    n = len(source)
    if keep_every == 1:
        return source.clone()
    rng = np.random.default_rng(seed)
    starts = np.arange(0, n, keep_every)
    sizes = np.minimum(keep_every, n - starts)
    picks = starts + (rng.random(len(starts)) * sizes).astype(np.int64)
    return StreamSource(source.X[picks], source.y[picks], source.feature_names)


def holdout_split(source: StreamSource, fraction: float = 0.1) -> HoldoutSplit:
    """Leading ``ceil(fraction * N)`` samples offline, the rest online."""
    n = len(source)
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if n < 2:
        raise ValueError("holdout_split needs at least two samples")
    cut = min(max(_ceil_fraction(fraction, n), 1), n - 1)
    return HoldoutSplit(source[:cut], source[cut:], fraction)


# --------------------------------------------------------------------------- #
# synthetic drift streams
# --------------------------------------------------------------------------- #

DRIFT_KINDS = ("sudden", "gradual", "recurring")


@dataclass
class SyntheticDriftSpec:
    """Two Gaussian-blob concepts whose class-to-blob assignment is swapped.

    Concept 0 draws class 0 around ``-separation`` and class 1 around
    ``+separation`` in every dimension; concept 1 swaps them, so the feature
    marginal is unchanged while the decision rule flips. A sudden spec without
    change points is a stationary stream.
    """

    drift_kind: str = "sudden"
    change_points: list[int] = field(default_factory=list)
    transition_width: int | None = None
    period: int | None = None
    noise_rate: float = 0.0
    dims: int = 2
    separation: float = 1.5
    positive_rate: float = 0.5
    seed: int = 0

    def validate(self, length: int | None = None) -> None:
        if self.drift_kind not in DRIFT_KINDS:
            raise SpecError(f"drift_kind must be one of {DRIFT_KINDS}, got {self.drift_kind!r}")
        cps = list(self.change_points)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise SpecError("change_points must be strictly increasing")
        if any(c < 0 for c in cps):
            raise SpecError("change_points must be non-negative")
        if not 0.0 <= self.noise_rate < 0.5:
            raise SpecError("noise_rate must be in [0, 0.5)")
        if self.dims < 1:
            raise SpecError("dims must be >= 1")
        if not 0.0 < self.positive_rate < 1.0:
            raise SpecError("positive_rate must be in (0, 1)")
        if self.drift_kind == "gradual":
            if not self.transition_width or self.transition_width < 1:
                raise SpecError("gradual drift needs transition_width >= 1")
            if not cps:
                raise SpecError("gradual drift needs at least one change point")
        elif self.transition_width is not None:
            raise SpecError("transition_width only applies to gradual drift")
        if self.drift_kind == "recurring":
            if not self.period or self.period < 1:
                raise SpecError("recurring drift needs period >= 1")
        elif self.period is not None:
            raise SpecError("period only applies to recurring drift")
        if length is not None:
            if length < 1:
                raise SpecError("length must be >= 1")
            if cps and length <= max(cps):
                raise SpecError("length must exceed the last change point")


def concept_schedule(spec: SyntheticDriftSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    """Concept id (0 or 1) active at each position."""
    pos = np.arange(length)
    cps = np.asarray(spec.change_points, dtype=np.int64)
    if spec.drift_kind == "sudden":
        return (np.searchsorted(cps, pos, side="right") % 2).astype(np.int8)
    if spec.drift_kind == "recurring":
        start = int(cps[0]) if cps.size else 0
        phase = np.where(pos >= start, (pos - start) // spec.period + 1, 0)
        return (phase % 2).astype(np.int8)
    # gradual: each change point ramps P(next concept) from 0 to 1 over the width
    width = spec.transition_width
    concept = np.zeros(length, dtype=np.int8)
    u = rng.random(length)
    current = 0
    prev_end = 0
    for cp in cps:
        concept[prev_end:cp] = current
        ramp_end = min(cp + width, length)
        ramp = (pos[cp:ramp_end] - cp + 1) / width
        concept[cp:ramp_end] = np.where(u[cp:ramp_end] < ramp, 1 - current, current)
        current = 1 - current
        prev_end = ramp_end
    concept[prev_end:] = current
    return concept


def generate_synthetic(spec: SyntheticDriftSpec, length: int) -> StreamSource:
    spec.validate(length)
    rng = np.random.default_rng(spec.seed)
    concept = concept_schedule(spec, length, rng)
    blob = (rng.random(length) < spec.positive_rate).astype(np.int8)
    centers = np.where(blob[:, None] == 1, spec.separation, -spec.separation)
    X = centers + rng.standard_normal((length, spec.dims))
    label = blob ^ concept
    if spec.noise_rate > 0:
        flip = rng.random(length) < spec.noise_rate
        label = label ^ flip.astype(np.int8)
    return StreamSource(X, label.astype(np.int8))
