"""Prediction datasets: ingestion, validation and population summaries."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .exceptions import (
    DegenerateLabelError,
    DomainError,
    ParseError,
    SchemaError,
    UnknownGroupError,
)

REQUIRED_COLUMNS = ("score", "label", "group")


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledPredictions:
    """Immutable table of (score, label, group) rows.

    Attributes
    ----------
    scores : ndarray of float64, shape (n,)
    labels : ndarray of int8, shape (n,)
    group_codes : ndarray of intp, shape (n,)
        Index of each row's group in ``groups``.
    groups : tuple of str
        Distinct group identifiers in first-appearance order.
    """

    scores: np.ndarray
    labels: np.ndarray
    group_codes: np.ndarray
    groups: tuple

    @classmethod
    def from_arrays(cls, scores, labels, groups) -> "LabeledPredictions":
        """Validate parallel arrays and build a dataset.

        ``groups`` may hold any hashable identifiers; they are stored as
        strings. Raises :class:`DomainError` on the first offending row.
        """
        scores = np.asarray(scores, dtype=float).ravel()
        labels = np.asarray(labels).ravel()
        groups = [str(g) for g in np.asarray(groups, dtype=object).ravel()]
        n = scores.shape[0]
        if n == 0:
            raise SchemaError("dataset has no rows")
        if labels.shape[0] != n or len(groups) != n:
            raise SchemaError(
                f"length mismatch: {n} scores, {labels.shape[0]} labels, "
                f"{len(groups)} groups"
            )
        bad = ~((scores >= 0.0) & (scores <= 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(i, f"score {scores[i]!r} outside [0, 1]")
        try:
            float_labels = labels.astype(float)
        except (TypeError, ValueError):
            float_labels = np.array([_label_as_float(v) for v in labels])
        bad = (float_labels != 0.0) & (float_labels != 1.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(i, f"label {labels[i]!r} not in {{0, 1}}")

        index = {}
        codes = np.empty(n, dtype=np.intp)
        for i, g in enumerate(groups):
            codes[i] = index.setdefault(g, len(index))
        return cls(
            scores=_frozen(scores),
            labels=_frozen(float_labels.astype(np.int8)),
            group_codes=_frozen(codes),
            groups=tuple(index),
        )

    def __len__(self):
        return int(self.scores.shape[0])

    @property
    def group_labels(self):
        """Group identifier of every row, as an object array."""
        return np.asarray(self.groups, dtype=object)[self.group_codes]

    def group_index(self, group) -> int:
        try:
            return self.groups.index(str(group))
        except ValueError:
            raise UnknownGroupError(group) from None

    def subset(self, group):
        """Scores and labels of the rows belonging to ``group``."""
        mask = self.group_codes == self.group_index(group)
        return self.scores[mask], self.labels[mask]

    def counts(self) -> np.ndarray:
        """Row counts as an array of shape (n_groups, 2) indexed [group, label]."""
        out = np.zeros((len(self.groups), 2), dtype=np.int64)
        np.add.at(out, (self.group_codes, self.labels), 1)
        return out

    def take(self, indices) -> "LabeledPredictions":
        """Rows at ``indices``; group ordering of ``self`` is preserved."""
        indices = np.asarray(indices, dtype=np.intp)
        return LabeledPredictions(
            scores=_frozen(self.scores[indices]),
            labels=_frozen(self.labels[indices]),
            group_codes=_frozen(self.group_codes[indices]),
            groups=self.groups,
        )

    def same_rows(self, other: "LabeledPredictions") -> bool:
        """True when labels and group identifiers agree row for row."""
        return (
            len(self) == len(other)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.group_labels, other.group_labels)
        )

    def __eq__(self, other):
        if not isinstance(other, LabeledPredictions):
            return NotImplemented
        return (
            self.groups == other.groups
            and np.array_equal(self.scores, other.scores)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.group_codes, other.group_codes)
        )

    __hash__ = None


def _label_as_float(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return np.nan


def _coerce_label(value, line):
    if isinstance(value, (bool, np.bool_)):
        raise DomainError(line, f"label {value!r} not in {{0, 1}}")
    if isinstance(value, (int, np.integer)) or (
        isinstance(value, (float, np.floating)) and float(value).is_integer()
    ):
        return int(value)
    raise DomainError(line, f"label {value!r} not in {{0, 1}}")


def _parse_score(text, line):
    try:
        score = float(text)
    except (TypeError, ValueError):
        raise ParseError(line, f"score {text!r} is not a number") from None
    if not 0.0 <= score <= 1.0:
        raise DomainError(line, f"score {text!r} outside [0, 1]")
    return score


def _parse_label(text, line):
    text = str(text).strip()
    if text not in ("0", "1"):
        try:
            int(text)
        except ValueError:
            raise ParseError(line, f"label {text!r} is not an integer") from None
        raise DomainError(line, f"label {text!r} not in {{0, 1}}")
    return int(text)


def _read_csv(stream, required=REQUIRED_COLUMNS):
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty CSV input (header row required)") from None
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing required columns: {', '.join(missing)}")
    pos = {c: header.index(c) for c in required}
    columns = {c: [] for c in required}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
        group = row[pos["group"]].strip()
        if not group:
            raise ParseError(line, "empty group identifier")
        columns["score"].append(_parse_score(row[pos["score"]], line))
        if "label" in columns:
            columns["label"].append(_parse_label(row[pos["label"]], line))
        columns["group"].append(group)
    return columns


def _read_json(stream, required=REQUIRED_COLUMNS):
    try:
        records = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    if not isinstance(records, list):
        raise SchemaError("JSON input must be an array of objects")
    columns = {c: [] for c in required}
    for i, rec in enumerate(records, start=1):
        if not isinstance(rec, dict):
            raise ParseError(i, "record is not an object")
        missing = [c for c in required if c not in rec]
        if missing:
            raise SchemaError(f"record {i} missing keys: {', '.join(missing)}")
        score = rec["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ParseError(i, f"score {score!r} is not a number")
        columns["score"].append(_parse_score(score, i))
        if "label" in columns:
            label = _coerce_label(rec["label"], i)
            if label not in (0, 1):
                raise DomainError(i, f"label {rec['label']!r} not in {{0, 1}}")
            columns["label"].append(label)
        columns["group"].append(str(rec["group"]))
    return columns


def _decode(source):
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    return text[1:] if text.startswith("\ufeff") else text


def _read_columns(source, format, required):
    text = _decode(source)
    if format == "csv":
        columns = _read_csv(io.StringIO(text, newline=""), required)
    elif format == "json":
        columns = _read_json(io.StringIO(text), required)
    else:
        raise ValueError(f"unsupported format {format!r}")
    if not columns["score"]:
        raise SchemaError("dataset has no rows")
    return columns


def load_predictions(source, format: str = "csv") -> LabeledPredictions:
    """Read a prediction table from a byte or text stream.

    Parameters
    ----------
    source : binary or text file-like, bytes, or str
        CSV with a header row containing ``score``, ``label`` and ``group``,
        or a JSON array of objects with those keys. Bytes are decoded as UTF-8.
    format : {"csv", "json"}
    """
    cols = _read_columns(source, format, REQUIRED_COLUMNS)
    return LabeledPredictions.from_arrays(cols["score"], cols["label"], cols["group"])


def load_scores(source, format: str = "csv"):
    """Like :func:`load_predictions` but without labels; returns (scores, groups)."""
    cols = _read_columns(source, format, ("score", "group"))
    return np.asarray(cols["score"], dtype=float), cols["group"]


def dump_predictions(data: LabeledPredictions, stream: IO[str], format: str = "csv"):
    """Write ``data`` so that :func:`load_predictions` reads it back unchanged."""
    rows = zip(data.scores.tolist(), data.labels.tolist(), data.group_labels.tolist())
    if format == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(REQUIRED_COLUMNS)
        for s, y, g in rows:
            writer.writerow((repr(s), y, g))
    elif format == "json":
        json.dump([{"score": s, "label": y, "group": g} for s, y, g in rows], stream)
    else:
        raise ValueError(f"unsupported format {format!r}")


def infer_format(path, format=None) -> str:
    if format is not None:
        return format
    return "json" if str(path).lower().endswith(".json") else "csv"


def read_predictions_file(path, format: str | None = None) -> LabeledPredictions:
    """Load a file, inferring the format from its extension when not given."""
    with open(path, "rb") as fh:
        return load_predictions(fh, infer_format(path, format))


@dataclass(frozen=True, eq=False)
class Prevalences:
    """Label prevalences and group shares within each label.

    ``p_s_given_y[s, y]`` is P[S=s | Y=y]; each column sums to one.
    """

    p_y: np.ndarray
    p_s_given_y: np.ndarray
    groups: tuple

    @property
    def p0(self):
        return float(self.p_y[0])

    @property
    def p1(self):
        return float(self.p_y[1])


def prevalences(data: LabeledPredictions) -> Prevalences:
    counts = data.counts().astype(float)
    per_label = counts.sum(axis=0)
    for y in (0, 1):
        if per_label[y] == 0:
            raise DegenerateLabelError(f"no rows with label {y}")
    return Prevalences(
        p_y=_frozen(per_label / per_label.sum()),
        p_s_given_y=_frozen(counts / per_label),
        groups=data.groups,
    )


@dataclass(frozen=True)
class LossSpec:
    """Misclassification costs; correct predictions cost nothing.

    Parameters
    ----------
    fp_cost : float
        Cost of predicting 1 when the label is 0.
    fn_cost : float
        Cost of predicting 0 when the label is 1.
    """

    fp_cost: float = 1.0
    fn_cost: float = 1.0

    def __post_init__(self):
        fp, fn = float(self.fp_cost), float(self.fn_cost)
        if not (np.isfinite(fp) and np.isfinite(fn)) or fp < 0 or fn < 0 or fp + fn <= 0:
            raise ValueError(
                f"costs must be finite, nonnegative with positive sum; got {fp}, {fn}"
            )
        object.__setattr__(self, "fp_cost", fp)
        object.__setattr__(self, "fn_cost", fn)

    @property
    def calibrated_threshold(self) -> float:
        """Loss-minimizing threshold for calibrated scores."""
        return self.fp_cost / (self.fp_cost + self.fn_cost)

    def loss(self, fpr, tpr, p0, p1):
        """Expected loss of a classifier at global ROC point (fpr, tpr)."""
        return fpr * self.fp_cost * p0 + (1.0 - tpr) * self.fn_cost * p1


def iter_groups(data: LabeledPredictions) -> Iterable[tuple]:
    for k, g in enumerate(data.groups):
        mask = data.group_codes == k
        yield g, data.scores[mask], data.labels[mask]
