"""Response / predictor containers and delimited-text ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    FamilyMismatchError,
    MissingValueError,
    ParseError,
    SampleSizeError,
    StructureError,
)
from .families import COMPATIBLE_KINDS, RegressionFamily, ResponseKind

MIN_OBSERVATIONS = 4
_MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}


def _kind_violation(values, kind):
    """Index of the first value violating ``kind``, or None."""
    if kind is ResponseKind.BINARY:
        bad = (values != 0.0) & (values != 1.0)
    elif kind is ResponseKind.COUNT:
        bad = (values < 0) | (values != np.floor(values))
    elif kind is ResponseKind.POSITIVE:
        bad = ~(values > 0)
    elif kind is ResponseKind.UNIT_INTERVAL:
        bad = ~((values > 0) & (values < 1))
    else:
        bad = ~np.isfinite(values)
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def infer_kind(values):
    """Most specific response kind, checked Binary, Count, UnitInterval, Positive."""
    values = np.asarray(values, dtype=float)
    for kind in (
        ResponseKind.BINARY,
        ResponseKind.COUNT,
        ResponseKind.UNIT_INTERVAL,
        ResponseKind.POSITIVE,
    ):
        if _kind_violation(values, kind) is None:
            return kind
    return ResponseKind.CONTINUOUS


@dataclass(frozen=True)
class ResponseVector:
    """The ``n`` observations of the response, tagged with their kind."""

    values: np.ndarray
    kind: ResponseKind

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        kind = ResponseKind(self.kind)
        if values.size < MIN_OBSERVATIONS:
            raise SampleSizeError(
                f"response needs at least {MIN_OBSERVATIONS} observations, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise MissingValueError(
                f"response has a non-finite value at row {int(np.flatnonzero(~np.isfinite(values))[0])}"
            )
        bad = _kind_violation(values, kind)
        if bad is not None:
            raise FamilyMismatchError(
                f"response value {values[bad]!r} at row {bad} is not valid for kind {kind.value!r}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)

    @classmethod
    def from_values(cls, values, kind=None):
        values = np.asarray(values, dtype=float)
        return cls(values, infer_kind(values) if kind is None else ResponseKind(kind))

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class ColumnMoments:
    sum: float
    sum_sq: float
    mean: float
    variance: float


class PredictorMatrix:
    """Column-major ``n x d`` predictor matrix with cached column moments.

    The data is copied into a read-only Fortran-ordered array and the
    moments (sum, sum of squares, mean, variance with ``n - 1``) are
    computed once at construction. ``copy=False`` adopts a float64
    Fortran-ordered input as is; the caller must then not modify it.
    """

    def __init__(self, data, names=None, copy=True):
        arr = np.array(data, dtype=float, order="F", ndmin=2, copy=True if copy else None)
        if arr.ndim != 2:
            raise StructureError(f"predictor matrix must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            r, c = np.argwhere(~np.isfinite(arr))[0]
            raise MissingValueError(f"non-finite predictor value at row {r}, column {c}")
        if not copy:
            arr = arr.view()
        arr.setflags(write=False)
        self._data = arr
        n, d = arr.shape
        if names is None:
            names = [f"x{j}" for j in range(d)]
        names = [str(nm) for nm in names]
        if len(names) != d:
            raise StructureError(f"{len(names)} column names for {d} columns")
        self.names = tuple(names)
        self.sums = arr.sum(axis=0)
        self.sum_sq = np.einsum("ij,ij->j", arr, arr)
        self.means = self.sums / n if n else np.zeros(d)
        self.variances = np.zeros(d)
        if n > 1:
            # two-pass variance, in column chunks to bound the temporary
            for lo in range(0, d, 256):
                centered = arr[:, lo : lo + 256] - self.means[lo : lo + 256]
                self.variances[lo : lo + 256] = np.einsum("ij,ij->j", centered, centered) / (n - 1)
        for a in (self.sums, self.sum_sq, self.means, self.variances):
            a.setflags(write=False)

    @property
    def data(self):
        return self._data

    @property
    def shape(self):
        return self._data.shape

    @property
    def n_rows(self):
        return self._data.shape[0]

    @property
    def n_columns(self):
        return self._data.shape[1]

    def column(self, j):
        self._check_index(j)
        return self._data[:, j]

    def _check_index(self, j):
        if not (isinstance(j, (int, np.integer)) and 0 <= j < self.n_columns):
            raise StructureError(f"column index {j!r} out of range [0, {self.n_columns})")

    def moments(self, j):
        self._check_index(j)
        return ColumnMoments(
            float(self.sums[j]), float(self.sum_sq[j]), float(self.means[j]), float(self.variances[j])
        )


def column_moments(pm, j):
    """``(sum, sum_sq, mean, variance)`` of column ``j``; variance uses ``n - 1``."""
    m = pm.moments(j)
    return m.sum, m.sum_sq, m.mean, m.variance


@dataclass(frozen=True)
class Dataset:
    response: ResponseVector
    predictors: PredictorMatrix
    response_name: str = "y"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.response) != self.predictors.n_rows:
            raise StructureError(
                f"response has {len(self.response)} rows but predictors have {self.predictors.n_rows}"
            )

    @property
    def n(self):
        return len(self.response)

    @property
    def d(self):
        return self.predictors.n_columns

    @classmethod
    def from_arrays(cls, X, y, kind=None, names=None, response_name="y"):
        return cls(ResponseVector.from_values(y, kind), PredictorMatrix(X, names), response_name)


def validate_for_family(ds, family):
    """Raise :class:`FamilyMismatchError` unless the response suits ``family``."""
    family = RegressionFamily.parse(family)
    response = ds.response if isinstance(ds, Dataset) else ds
    required = COMPATIBLE_KINDS[family]
    bad = _kind_violation(response.values, required)
    if bad is not None:
        raise FamilyMismatchError(
            f"family {family.value!r} needs a {required.value} response; "
            f"value {response.values[bad]!r} at row {bad} is not one "
            f"(response kind is {response.kind.value!r})"
        )


# -- CSV -----------------------------------------------------------------

def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return token.strip().lower() not in _MISSING_TOKENS


def _sniff_delimiter(first_line):
    return "\t" if "\t" in first_line else ","


def load_csv(path, response_column=0, delimiter=None, header=None, kind=None):
    """Read a rectangular numeric table.

    Parameters
    ----------
    path : str or Path
    response_column : str or int
        Header name or 0-based column index of the response. A string of
        digits is treated as an index when it does not match a header name.
    delimiter : {",", "\\t"}, optional
        Detected from the first line when omitted.
    header : bool, optional
        Whether the first row holds column names; detected when omitted
        (a first row with any non-numeric cell is a header).
    kind : ResponseKind or str, optional
        Overrides response-kind inference.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise StructureError(f"{path}: empty file")
    if delimiter is None:
        delimiter = _sniff_delimiter(lines[0])
    rows = [row for row in csv.reader(lines, delimiter=delimiter) if row]
    if header is None:
        header = not all(_is_number(tok) for tok in rows[0] if tok.strip())
    names = [tok.strip() for tok in rows[0]] if header else None
    body = rows[1:] if header else rows
    if not body:
        raise StructureError(f"{path}: no data rows")
    width = len(names) if names else len(body[0])
    first_row = 2 if header else 1
    table = np.empty((len(body), width), dtype=float)
    for i, row in enumerate(body):
        line_no = i + first_row
        if len(row) != width:
            raise StructureError(f"{path}: line {line_no} has {len(row)} fields, expected {width}")
        for j, tok in enumerate(row):
            tok = tok.strip()
            col = names[j] if names else str(j)
            if tok.lower() in _MISSING_TOKENS:
                raise MissingValueError(f"{path}: missing value at line {line_no}, column {col!r}")
            try:
                table[i, j] = float(tok)
            except ValueError:
                raise ParseError(
                    f"{path}: cannot parse {tok!r} at line {line_no}, column {col!r}"
                ) from None
    if not np.all(np.isfinite(table)):
        i, j = np.argwhere(~np.isfinite(table))[0]
        raise MissingValueError(f"{path}: non-finite value at line {i + first_row}, column {j}")
    if names is None:
        names = [f"x{j}" for j in range(width)]
    resp = _resolve_column(response_column, names)
    keep = [j for j in range(width) if j != resp]
    return Dataset(
        ResponseVector.from_values(table[:, resp], kind),
        PredictorMatrix(table[:, keep], [names[j] for j in keep]),
        response_name=names[resp],
        meta={"source": str(path)},
    )


def _resolve_column(spec, names):
    if isinstance(spec, (int, np.integer)):
        idx = int(spec)
    elif spec in names:
        return names.index(spec)
    elif isinstance(spec, str) and spec.lstrip("-").isdigit():
        idx = int(spec)
    else:
        raise StructureError(f"response column {spec!r} not found among {names}")
    if not -len(names) <= idx < len(names):
        raise StructureError(f"response column index {idx} out of range for {len(names)} columns")
    return idx % len(names)


def write_csv(ds, path, delimiter=","):
    """Write ``ds`` with the response first, floats at round-trip precision."""
    names = [ds.response_name, *ds.predictors.names]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(names)
        X = ds.predictors.data
        y = ds.response.values
        for i in range(ds.n):
            writer.writerow([repr(float(y[i])), *(repr(float(v)) for v in X[i])])


def default_top_k(n):
    """floor(n / ln n), at least 1."""
    return max(1, int(math.floor(n / math.log(n)))) if n > 1 else 1
