"""Categorical/ordinal tabular data: loading, encoding, discretization,
subsampling and pairwise contingency utilities."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .stats import chi_square_sf

logger = logging.getLogger(__name__)

KINDS = ("binary", "ordinal", "categorical")
NA_VALUES = frozenset({"", "?", "NA", "NaN", "nan"})


class DataError(ValueError):
    """Raised for malformed input data or schema."""


@dataclass(frozen=True)
class VariableMeta:
    name: str
    kind: str
    levels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind not in KINDS:
            raise DataError(f"{self.name}: unknown kind {self.kind!r}")
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"{self.name}: duplicate levels")
        if len(self.levels) < 2:
            raise DataError(f"{self.name}: needs at least 2 levels")
        if self.kind == "binary" and len(self.levels) != 2:
            raise DataError(f"{self.name}: binary variable needs exactly 2 levels")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def encode(self, value: str) -> int:
        return self.levels.index(value)

    def decode(self, code: int) -> str:
        return self.levels[code]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x p matrix of level codes with per-column metadata."""

    metas: tuple[VariableMeta, ...]
    rows: np.ndarray
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        metas = tuple(self.metas)
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(metas))
        if rows.ndim != 2 or rows.shape[1] != len(metas):
            raise DataError(f"rows shape {rows.shape} does not match {len(metas)} columns")
        for j, m in enumerate(metas):
            col = rows[:, j]
            if col.size and (col.min() < 0 or col.max() >= m.n_levels):
                raise DataError(f"{m.name}: level code out of range")
        names = [m.name for m in metas]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "metas", metas)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_columns(cls, columns: dict[str, Sequence[int]], metas: Sequence[VariableMeta] | None = None,
                     kinds: dict[str, str] | None = None) -> "Dataset":
        """Build from integer-coded columns; metadata is inferred when not given
        (levels ``"0".."max"``, kind binary for 2 levels else ordinal)."""
        names = list(columns)
        data = [np.asarray(columns[c], dtype=np.int64) for c in names]
        if metas is None:
            kinds = kinds or {}
            metas = []
            for name, col in zip(names, data):
                L = max(int(col.max()) + 1 if col.size else 2, 2)
                kind = kinds.get(name, "binary" if L == 2 else "ordinal")
                metas.append(VariableMeta(name, kind, tuple(str(i) for i in range(L))))
        rows = np.column_stack(data) if data else np.zeros((0, 0), dtype=np.int64)
        return cls(tuple(metas), rows)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.metas == other.metas and np.array_equal(self.rows, other.rows)

    __hash__ = None

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def names(self) -> list[str]:
        return [m.name for m in self.metas]

    def index(self, name: str) -> int:
        for j, m in enumerate(self.metas):
            if m.name == name:
                return j
        raise KeyError(f"unknown column {name!r}")

    def meta(self, name: str) -> VariableMeta:
        return self.metas[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.index(name)]

    def select_rows(self, idx) -> "Dataset":
        return Dataset(self.metas, self.rows[np.asarray(idx)])

    def select_columns(self, names: Sequence[str]) -> "Dataset":
        cols = [self.index(c) for c in names]
        return Dataset(tuple(self.metas[c] for c in cols), self.rows[:, cols])

    def replace_column(self, name: str, meta: VariableMeta, codes: np.ndarray) -> "Dataset":
        j = self.index(name)
        metas = list(self.metas)
        metas[j] = meta
        rows = np.array(self.rows)
        rows[:, j] = codes
        return Dataset(tuple(metas), rows)


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())


# ---------------------------------------------------------------------------
# ingestion / export


def read_schema(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"schema file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    if not isinstance(spec, list):
        raise DataError("schema must be a JSON array")
    for entry in spec:
        if "name" not in entry or entry.get("kind") not in KINDS:
            raise DataError(f"bad schema entry: {entry!r}")
        if entry["kind"] in ("binary", "ordinal") and not entry.get("levels"):
            raise DataError(f"{entry['name']}: ordinal/binary columns need explicit levels")
    return spec


def _sort_levels(values) -> list[str]:
    try:
        return sorted(values, key=float)
    except ValueError:
        return sorted(values)


def load_csv(path, schema, na_values=NA_VALUES) -> Dataset:
    """Read a headed CSV and encode the schema's columns to level codes.

    Rows with a missing value, or a value outside a declared level list, are
    dropped (listwise deletion) and counted in ``Dataset.dropped``. Categorical
    columns may omit ``levels``; they are then inferred from the data, sorted
    numerically when every value parses as a number.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    entries = schema if isinstance(schema, list) else read_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw = [[v.strip() for v in row] for row in reader if row]

    cols = []
    for entry in entries:
        if entry["name"] not in header:
            raise DataError(f"column {entry['name']!r} missing from {path}")
        cols.append(header.index(entry["name"]))

    keep = np.ones(len(raw), dtype=bool)
    for i, row in enumerate(raw):
        if len(row) != len(header):
            keep[i] = False
            continue
        for entry, c in zip(entries, cols):
            v = row[c]
            if v in na_values or (entry.get("levels") and v not in entry["levels"]):
                keep[i] = False
                break
    raw = [row for row, k in zip(raw, keep) if k]
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("%s: dropped %d of %d rows with missing or unknown values",
                       path, dropped, len(keep))

    metas, codes = [], []
    for entry, c in zip(entries, cols):
        values = [row[c] for row in raw]
        levels = entry.get("levels") or _sort_levels(set(values))
        lookup = {lv: i for i, lv in enumerate(levels)}
        col = np.fromiter((lookup[v] for v in values), dtype=np.int64, count=len(values))
        if np.unique(col).size < 2:
            raise DataError(f"column {entry['name']!r} has fewer than 2 observed levels")
        metas.append(VariableMeta(entry["name"], entry["kind"], tuple(levels)))
        codes.append(col)
    rows = np.column_stack(codes) if codes else np.zeros((0, 0), dtype=np.int64)
    return Dataset(tuple(metas), rows, dropped=dropped)


def schema_of(ds: Dataset) -> list[dict]:
    return [{"name": m.name, "kind": m.kind, "levels": list(m.levels)} for m in ds.metas]


def save_csv(ds: Dataset, path, schema_path=None) -> None:
    """Write decoded level labels (and optionally the JSON schema)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.names)
        for row in ds.rows:
            w.writerow([m.levels[c] for m, c in zip(ds.metas, row)])
    if schema_path is not None:
        with open(schema_path, "w", encoding="utf-8") as fh:
            json.dump(schema_of(ds), fh, indent=1)


# ---------------------------------------------------------------------------
# transforms


def discretize(ds: Dataset, column: str, cutpoints: Sequence[float], labels: Sequence[str]) -> Dataset:
    """Replace a numeric-labelled column by an ordinal binning.

    Bins are right-closed: value ``v`` falls in bin ``i`` when
    ``cutpoints[i-1] < v <= cutpoints[i]``.
    """
    if len(labels) != len(cutpoints) + 1:
        raise DataError("need exactly one more label than cutpoints")
    cuts = np.asarray(cutpoints, dtype=float)
    if np.any(np.diff(cuts) <= 0):
        raise DataError("cutpoints must be strictly ascending")
    meta = ds.meta(column)
    try:
        level_values = np.array([float(v) for v in meta.levels])
    except ValueError as exc:
        raise DataError(f"{column}: non-numeric value ({exc})") from None
    values = level_values[ds.column(column)]
    codes = np.searchsorted(cuts, values, side="left")
    empty = [labels[i] for i in range(len(labels)) if not np.any(codes == i)]
    if empty:
        raise DataError(f"{column}: empty bins {empty}")
    return ds.replace_column(column, VariableMeta(column, "ordinal", tuple(labels)), codes)


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    if n > ds.n:
        raise DataError(f"cannot draw {n} rows from {ds.n}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ds.n, size=n, replace=False))
    return ds.select_rows(idx)


def contingency(ds: Dataset, x: str, y: str) -> ContingencyTable:
    mx, my = ds.meta(x), ds.meta(y)
    flat = ds.column(x) * my.n_levels + ds.column(y)
    counts = np.bincount(flat, minlength=mx.n_levels * my.n_levels)
    return ContingencyTable(counts.reshape(mx.n_levels, my.n_levels))


def chi_square_independence(t: ContingencyTable) -> tuple[float, int, float]:
    """Pearson chi-square test of independence on the non-empty rows/columns."""
    counts = np.asarray(t.counts, dtype=float)
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    if counts.size == 0 or min(counts.shape) < 2:
        return 0.0, 0, 1.0
    n = counts.sum()
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    stat = float(((counts - expected) ** 2 / expected).sum())
    df = (counts.shape[0] - 1) * (counts.shape[1] - 1)
    return stat, df, chi_square_sf(stat, df)


def rmsea(stat: float, df: int, n: int) -> float:
    """Root mean square error of approximation of a chi-square statistic."""
    if df < 1:
        raise DataError("RMSEA undefined for df = 0")
    if n < 1:
        raise DataError("RMSEA needs n >= 1")
    return math.sqrt(max(stat - df, 0.0) / (n * df))
