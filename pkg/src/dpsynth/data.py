"""Schema, dataset and discretization primitives.

A codebook declares every column up front (categorical levels, continuous
bounds and bin counts). All downstream indexing uses the codebook order, and
continuous bounds always come from the codebook, never from the records.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

DEFAULT_MAX_CELLS = 10**6


class SchemaError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()
    min: float = math.nan
    max: float = math.nan
    bin_count: int = 0
    missing_code: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("empty column name")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"column {self.name!r}: empty level list")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r}: duplicate levels")
            if self.missing_code is not None and self.missing_code not in self.levels:
                raise SchemaError(
                    f"column {self.name!r}: missing code {self.missing_code!r} is not a level"
                )
        elif self.kind == CONTINUOUS:
            if not (math.isfinite(self.min) and math.isfinite(self.max)):
                raise SchemaError(f"column {self.name!r}: bounds must be finite")
            if self.min >= self.max:
                raise SchemaError(f"column {self.name!r}: degenerate range (min >= max)")
            if int(self.bin_count) != self.bin_count or self.bin_count < 1:
                raise SchemaError(f"column {self.name!r}: bin_count must be a positive integer")
            if self.missing_code is not None:
                raise SchemaError(f"column {self.name!r}: continuous missingness is not supported")
        else:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def cardinality(self) -> int:
        """Number of cells this column contributes to a cross-tabulation."""
        return len(self.levels) if self.is_categorical else int(self.bin_count)

    @property
    def bin_width(self) -> float:
        return (self.max - self.min) / self.bin_count

    def to_line(self) -> str:
        if self.is_categorical:
            line = f"{self.name} | categorical | {','.join(self.levels)}"
            if self.missing_code is not None:
                line += f" | missing={self.missing_code}"
            return line
        return f"{self.name} | continuous | {self.min!r} | {self.max!r} | {self.bin_count}"


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        seen = set()
        for col in self.columns:
            if col.name in seen:
                raise SchemaError(f"duplicate column {col.name!r}")
            seen.add(col.name)

    def __len__(self):
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    def __getitem__(self, key: int | str) -> ColumnSpec:
        if isinstance(key, str):
            return self.columns[self.index(key)]
        return self.columns[key]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(c.cardinality for c in self.columns)

    def index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)

    def categorical_mask(self) -> np.ndarray:
        return np.array([c.is_categorical for c in self.columns], dtype=bool)

    def to_text(self) -> str:
        return "\n".join(c.to_line() for c in self.columns) + "\n"


def _parse_float(token: str, name: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise SchemaError(f"line {lineno}, column {name!r}: not a number: {token!r}") from None


def load_schema(codebook_text: str) -> Schema:
    """Parse a codebook.

    One column per line, ``#`` starts a comment::

        sex    | categorical | F,M
        status | categorical | A,B,NA | missing=NA
        age    | continuous  | 0 | 100 | 20
    """
    columns: list[ColumnSpec] = []
    lines_by_name: dict[str, int] = {}
    for lineno, raw in enumerate(codebook_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) < 3:
            raise SchemaError(f"line {lineno}: expected 'name | kind | ...', got {raw!r}")
        name, kind = parts[0], parts[1].lower()
        if name in lines_by_name:
            raise SchemaError(
                f"line {lineno}: duplicate column {name!r} (first declared on line {lines_by_name[name]})"
            )
        try:
            if kind == CATEGORICAL:
                if len(parts) not in (3, 4):
                    raise SchemaError(f"line {lineno}, column {name!r}: malformed categorical entry")
                levels = tuple(tok.strip() for tok in parts[2].split(",") if tok.strip())
                missing = None
                if len(parts) == 4:
                    if not parts[3].startswith("missing="):
                        raise SchemaError(f"line {lineno}, column {name!r}: expected 'missing=CODE'")
                    missing = parts[3][len("missing="):].strip()
                col = ColumnSpec(name, CATEGORICAL, levels=levels, missing_code=missing)
            elif kind == CONTINUOUS:
                if len(parts) != 5:
                    raise SchemaError(
                        f"line {lineno}, column {name!r}: expected 'name | continuous | min | max | bin_count'"
                    )
                lo = _parse_float(parts[2], name, lineno)
                hi = _parse_float(parts[3], name, lineno)
                bins = _parse_float(parts[4], name, lineno)
                if bins != int(bins):
                    raise SchemaError(f"line {lineno}, column {name!r}: bin_count must be an integer")
                col = ColumnSpec(name, CONTINUOUS, min=lo, max=hi, bin_count=int(bins))
            else:
                raise SchemaError(f"line {lineno}, column {name!r}: unknown kind {parts[1]!r}")
        except SchemaError as exc:
            msg = str(exc)
            if not msg.startswith("line "):
                msg = f"line {lineno}: {msg}"
            raise SchemaError(msg) from None
        lines_by_name[name] = lineno
        columns.append(col)
    if not columns:
        raise SchemaError("codebook declares no columns")
    return Schema(tuple(columns))


class Dataset:
    """Validated records over a schema.

    ``values`` is an ``(n, q)`` float array: categorical columns hold level
    indices, continuous columns hold real values. The array is read-only.
    """

    def __init__(self, schema: Schema, values: np.ndarray, clamp_count: int = 0):
        values = np.array(values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[1] != len(schema):
            raise DataError(f"expected an (n, {len(schema)}) array, got shape {values.shape}")
        _validate_values(schema, values)
        values.setflags(write=False)
        self.schema = schema
        self.values = values
        self.clamp_count = clamp_count

    @classmethod
    def from_columns(cls, schema: Schema, columns: Sequence[Sequence[float]]) -> "Dataset":
        return cls(schema, np.column_stack([np.asarray(c, dtype=float) for c in columns]))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    def column(self, key: int | str) -> np.ndarray:
        j = self.schema.index(key) if isinstance(key, str) else key
        return self.values[:, j]

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.values[rows])

    def to_csv(self) -> str:
        return serialize_dataset(self)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Dataset(n={self.n}, q={self.q})"


def _validate_values(schema: Schema, values: np.ndarray) -> None:
    for j, col in enumerate(schema):
        v = values[:, j]
        if col.is_categorical:
            bad = (v != np.floor(v)) | (v < 0) | (v >= len(col.levels)) | ~np.isfinite(v)
        else:
            bad = ~((v >= col.min) & (v <= col.max))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(f"row {row}, column {col.name!r}: invalid value {v[row]!r}")


def load_dataset(schema: Schema, csv_text: str, policy: str = "strict") -> Dataset:
    """Read comma-separated records with a header row.

    Header names are matched to the schema by name, so column order in the
    file does not matter. Under ``policy="clamp"`` out-of-range continuous
    values are clipped to the codebook bounds and counted in
    ``Dataset.clamp_count``; under ``"strict"`` they are an error.
    """
    if policy not in ("strict", "clamp"):
        raise ValueError(f"unknown policy {policy!r}")
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("missing header row") from None
    names = schema.names
    if sorted(header) != sorted(names):
        missing = sorted(set(names) - set(header))
        extra = sorted(set(header) - set(names))
        raise DataError(f"header does not match schema (missing {missing}, unexpected {extra})")
    if len(set(header)) != len(header):
        raise DataError("duplicate names in header")
    position = [header.index(name) for name in names]
    lookups = [
        {lvl: i for i, lvl in enumerate(col.levels)} if col.is_categorical else None
        for col in schema
    ]
    rows: list[list[float]] = []
    clamped = 0
    for lineno, record in enumerate(reader, start=1):
        if not record:
            continue
        if len(record) != len(header):
            raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(record)}")
        out = []
        for j, col in enumerate(schema):
            token = record[position[j]].strip()
            if col.is_categorical:
                if token == "" and col.missing_code is not None:
                    token = col.missing_code
                idx = lookups[j].get(token)
                if idx is None:
                    raise DataError(f"row {lineno}, column {col.name!r}: unknown code {token!r}")
                out.append(float(idx))
            else:
                try:
                    v = float(token)
                except ValueError:
                    raise DataError(
                        f"row {lineno}, column {col.name!r}: not a number: {token!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"row {lineno}, column {col.name!r}: non-finite value")
                if v < col.min or v > col.max:
                    if policy == "strict":
                        raise DataError(
                            f"row {lineno}, column {col.name!r}: value {v} outside [{col.min}, {col.max}]"
                        )
                    v = min(max(v, col.min), col.max)
                    clamped += 1
                out.append(v)
        rows.append(out)
    values = np.array(rows, dtype=float).reshape(len(rows), len(schema))
    return Dataset(schema, values, clamp_count=clamped)


def serialize_dataset(data: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(data.schema.names)
    cols = []
    for j, col in enumerate(data.schema):
        v = data.values[:, j]
        if col.is_categorical:
            levels = np.array(col.levels, dtype=object)
            cols.append(levels[v.astype(np.int64)])
        else:
            cols.append([repr(float(x)) for x in v])
    for row in zip(*cols):
        writer.writerow(row)
    return buf.getvalue()


@dataclass(frozen=True)
class BinnedView:
    """Fully discretized records: one integer cell index per column."""

    schema: Schema
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise DataError(f"binned rows have shape {rows.shape}")
        cards = np.array(self.schema.cardinalities)
        if rows.size and ((rows < 0) | (rows >= cards)).any():
            raise DataError("bin index out of range")
        rows = rows.copy()
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return self.schema.cardinalities


def bin_values(col: ColumnSpec, v: np.ndarray) -> np.ndarray:
    """Equal-width bins over the codebook range; ``max`` falls in the last bin."""
    idx = np.floor((np.asarray(v, dtype=float) - col.min) / (col.max - col.min) * col.bin_count)
    return np.clip(idx, 0, col.bin_count - 1).astype(np.int64)


def bin_midpoints(col: ColumnSpec, bins: np.ndarray) -> np.ndarray:
    return col.min + (np.asarray(bins, dtype=float) + 0.5) * col.bin_width


def discretize(data: Dataset) -> BinnedView:
    cols = []
    for j, col in enumerate(data.schema):
        v = data.values[:, j]
        cols.append(v.astype(np.int64) if col.is_categorical else bin_values(col, v))
    rows = np.column_stack(cols) if cols else np.empty((data.n, 0), dtype=np.int64)
    return BinnedView(data.schema, rows)


@dataclass(frozen=True)
class AssociationMatrix:
    scores: np.ndarray
    cardinalities: tuple[int, ...]

    @property
    def q(self) -> int:
        return self.scores.shape[0]


def cramers_v(a: np.ndarray, b: np.ndarray) -> float:
    """Cramér's V of two integer-coded vectors, over observed categories only."""
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    r, c = ia.max() + 1, ib.max() + 1
    if min(r, c) == 1:
        return 0.0
    table = np.bincount(ia * c + ib, minlength=r * c).reshape(r, c).astype(float)
    n = table.sum()
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = ((table - expected) ** 2 / expected).sum()
    return float(min(1.0, math.sqrt(chi2 / (n * (min(r, c) - 1)))))


def association_matrix(public_data: BinnedView) -> AssociationMatrix:
    if public_data.n < 2:
        raise DataError("association analysis needs at least 2 rows")
    q = len(public_data.schema)
    scores = np.eye(q)
    for i in range(q):
        for j in range(i + 1, q):
            scores[i, j] = scores[j, i] = cramers_v(public_data.rows[:, i], public_data.rows[:, j])
    scores.setflags(write=False)
    return AssociationMatrix(scores, public_data.cardinalities)


def group_variables(
    assoc: AssociationMatrix,
    threshold: float = 0.3,
    max_group_size: int = 3,
    max_cells: int = DEFAULT_MAX_CELLS,
):
    """Greedy agglomerative grouping of columns by mean cross-group association.

    At each step the admissible pair of groups with the highest mean
    association (at least ``threshold``) is merged. A merge is admissible if
    the result has at most ``max_group_size`` columns and at most
    ``max_cells`` cells. Ties go to the pair whose members have the lowest
    column indices.
    """
    from .synth.marginals import GroupingPlan

    if not 0 <= threshold <= 1:
        raise ValueError("threshold must lie in [0, 1]")
    if max_group_size < 1 or max_cells < 1:
        raise ValueError("max_group_size and max_cells must be positive")
    cards = assoc.cardinalities
    groups: list[tuple[int, ...]] = [(j,) for j in range(assoc.q)]
    while True:
        best = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                merged = tuple(sorted(groups[a] + groups[b]))
                if len(merged) > max_group_size:
                    continue
                if math.prod(cards[j] for j in merged) > max_cells:
                    continue
                score = float(assoc.scores[np.ix_(groups[a], groups[b])].mean())
                if score < threshold:
                    continue
                key = (-score, groups[a], groups[b])
                if best is None or key < best[0]:
                    best = (key, a, b, merged)
        if best is None:
            break
        _, a, b, merged = best
        groups = [g for i, g in enumerate(groups) if i not in (a, b)] + [merged]
        groups.sort()
    return GroupingPlan(tuple(groups), cards)


def singleton_plan(schema: Schema):
    from .synth.marginals import GroupingPlan

    return GroupingPlan(tuple((j,) for j in range(len(schema))), schema.cardinalities)


def read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def concat(datasets: Iterable[Dataset]) -> Dataset:
    datasets = list(datasets)
    return Dataset(datasets[0].schema, np.vstack([d.values for d in datasets]))
