"""Shared data types, the MAE metric and the CSV formats."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np


class TableError(ValueError):
    """An observation table violates its structural invariants."""


class CSVFormatError(ValueError):
    """A CSV file could not be parsed; ``row`` is the 1-based line number."""

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if row is not None:
            where += f"row {row}: "
        super().__init__(where + message)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class ObservationTable:
    """Sparse continuous observations ``(object, user, value)``.

    Entries are kept sorted by ``(object, user)``. Object ids must be dense in
    ``[0, n_objects)`` and user ids dense in ``[0, n_users)``; every object
    needs at least one observer and every user at least one observation.
    Instances are immutable.
    """

    __slots__ = ("objects", "users", "values", "n_objects", "n_users")

    def __init__(self, objects, users, values, n_objects=None, n_users=None):
        objects = np.asarray(objects)
        users = np.asarray(users)
        values = np.asarray(values, dtype=np.float64)
        if not (objects.ndim == users.ndim == values.ndim == 1):
            raise TableError("objects, users and values must be 1-d")
        if not (len(objects) == len(users) == len(values)):
            raise TableError("objects, users and values must have equal length")
        if len(values) == 0:
            raise TableError("table has no entries")
        if objects.dtype.kind not in "iu" or users.dtype.kind not in "iu":
            if not (np.all(objects == np.round(objects)) and np.all(users == np.round(users))):
                raise TableError("object and user ids must be integers")
        objects = objects.astype(np.int64)
        users = users.astype(np.int64)
        if objects.min() < 0 or users.min() < 0:
            raise TableError("ids must be non-negative")
        if not np.all(np.isfinite(values)):
            raise TableError("all values must be finite")

        n_objects = int(objects.max()) + 1 if n_objects is None else int(n_objects)
        n_users = int(users.max()) + 1 if n_users is None else int(n_users)
        if objects.max() >= n_objects or users.max() >= n_users:
            raise TableError("id out of range")

        order = np.lexsort((users, objects))
        objects, users, values = objects[order], users[order], values[order]
        dup = (np.diff(objects) == 0) & (np.diff(users) == 0)
        if np.any(dup):
            i = int(np.flatnonzero(dup)[0])
            raise TableError(f"duplicate entry for object {objects[i]}, user {users[i]}")
        missing_obj = np.flatnonzero(np.bincount(objects, minlength=n_objects) == 0)
        if len(missing_obj):
            raise TableError(f"object {missing_obj[0]} has no observations")
        missing_user = np.flatnonzero(np.bincount(users, minlength=n_users) == 0)
        if len(missing_user):
            raise TableError(f"user {missing_user[0]} has no observations")

        set_ = object.__setattr__
        set_(self, "objects", _frozen(objects, np.int64))
        set_(self, "users", _frozen(users, np.int64))
        set_(self, "values", _frozen(values, np.float64))
        set_(self, "n_objects", n_objects)
        set_(self, "n_users", n_users)

    def __setattr__(self, name, value):
        raise AttributeError("ObservationTable is immutable")

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, ObservationTable):
            return NotImplemented
        return (
            self.n_objects == other.n_objects
            and self.n_users == other.n_users
            and np.array_equal(self.objects, other.objects)
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"ObservationTable(n_objects={self.n_objects}, n_users={self.n_users}, entries={len(self)})"

    @classmethod
    def from_dense(cls, matrix):
        """Build from an ``(n_objects, n_users)`` array; NaN marks a missing entry."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise TableError("dense matrix must be 2-d")
        obj, usr = np.nonzero(~np.isnan(matrix))
        return cls(obj, usr, matrix[obj, usr], n_objects=matrix.shape[0], n_users=matrix.shape[1])

    def to_dense(self):
        out = np.full((self.n_objects, self.n_users), np.nan)
        out[self.objects, self.users] = self.values
        return out

    def with_values(self, values):
        """Same entry set, new values (in this table's entry order)."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise TableError("replacement values must match the entry count")
        return ObservationTable(self.objects, self.users, values, self.n_objects, self.n_users)

    def user_entries(self, user):
        """(objects, values) observed by ``user``, ordered by object."""
        mask = self.users == user
        return self.objects[mask], self.values[mask]

    def object_bounds(self):
        """Per-object (min, max) of the observed values."""
        lo = np.full(self.n_objects, np.inf)
        hi = np.full(self.n_objects, -np.inf)
        np.minimum.at(lo, self.objects, self.values)
        np.maximum.at(hi, self.objects, self.values)
        return lo, hi

    def groups(self):
        """Observed values split per object (views into ``values``)."""
        cuts = np.flatnonzero(np.diff(self.objects)) + 1
        return np.split(self.values, cuts)


@dataclass(frozen=True)
class GroundTruth:
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, np.float64)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("ground truth must be a non-empty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("ground truth values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def check_covers(self, table):
        if len(self) != table.n_objects:
            raise ValueError(f"ground truth has {len(self)} values for {table.n_objects} objects")


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights, np.float64)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    @classmethod
    def uniform(cls, n_users):
        return cls(np.full(n_users, 1.0 / n_users))


@dataclass(frozen=True)
class AggregateResult:
    values: np.ndarray
    weights: WeightVector
    iterations: int
    converged: bool


def mae(a, b):
    """Mean absolute difference between two equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("mae of empty vectors")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("mae inputs must be finite")
    return float(np.mean(np.abs(a - b)))


# ---------------------------------------------------------------- CSV formats


def fmt(x):
    """Float formatting used by every CSV writer (17 significant digits)."""
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path, header):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as e:
        raise CSVFormatError(f"cannot read file: {e.strerror}", path=path) from e
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise CSVFormatError("empty file", row=1, path=path) from None
    if [c.strip() for c in first] != list(header):
        raise CSVFormatError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", row=1, path=path)
    rows = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise CSVFormatError(f"expected {len(header)} fields, got {len(row)}", row=reader.line_num, path=path)
        rows.append((reader.line_num, row))
    return rows


def _parse_int(s, lineno, path, name):
    try:
        v = int(s)
    except ValueError:
        raise CSVFormatError(f"{name} {s!r} is not an integer", row=lineno, path=path) from None
    if v < 0:
        raise CSVFormatError(f"{name} must be non-negative", row=lineno, path=path)
    return v


def _parse_float(s, lineno, path, name="value"):
    try:
        v = float(s)
    except ValueError:
        raise CSVFormatError(f"{name} {s!r} is not a number", row=lineno, path=path) from None
    if not math.isfinite(v):
        raise CSVFormatError(f"{name} must be finite", row=lineno, path=path)
    return v


def write_table(table, path):
    rows = zip(table.objects.tolist(), table.users.tolist(), map(fmt, table.values))
    _write_rows(path, ("object", "user", "value"), rows)


def read_table(path):
    rows = _read_rows(path, ("object", "user", "value"))
    if not rows:
        raise CSVFormatError("no observations", path=path)
    obj, usr, val = [], [], []
    for lineno, (o, u, v) in rows:
        obj.append(_parse_int(o, lineno, path, "object"))
        usr.append(_parse_int(u, lineno, path, "user"))
        val.append(_parse_float(v, lineno, path))
    try:
        return ObservationTable(obj, usr, val)
    except TableError as e:
        raise CSVFormatError(str(e), path=path) from e


def write_truth(truth, path):
    _write_rows(path, ("object", "value"), enumerate(map(fmt, truth.values)))


def read_truth(path):
    rows = _read_rows(path, ("object", "value"))
    vals = {}
    for lineno, (o, v) in rows:
        o = _parse_int(o, lineno, path, "object")
        if o in vals:
            raise CSVFormatError(f"duplicate object {o}", row=lineno, path=path)
        vals[o] = _parse_float(v, lineno, path)
    if sorted(vals) != list(range(len(vals))) or not vals:
        raise CSVFormatError("object ids must be dense from 0", path=path)
    return GroundTruth(np.array([vals[i] for i in range(len(vals))]))


def write_vector(values, path, header):
    """Two-column ``index,value`` CSV (weights, variance audits, aggregates)."""
    _write_rows(path, header, enumerate(map(fmt, values)))


def read_vector(path, header):
    rows = _read_rows(path, header)
    out = np.empty(len(rows))
    for i, (lineno, (k, v)) in enumerate(rows):
        if _parse_int(k, lineno, path, header[0]) != i:
            raise CSVFormatError(f"{header[0]} ids must be dense and ordered", row=lineno, path=path)
        out[i] = _parse_float(v, lineno, path, header[1])
    return out


def ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
