from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import Dataset


@dataclass(frozen=True)
class Term:
    kind: str  # "intercept" | "dummy" | "continuous"
    column: str | None = None
    level: str | None = None
    level_index: int = -1
    center: float = 0.0
    scale: float = 1.0

    @property
    def name(self) -> str:
        if self.kind == "intercept":
            return "(intercept)"
        if self.kind == "dummy":
            return f"{self.column}[{self.level}]"
        return self.column


@dataclass(frozen=True)
class DesignMatrix:
    rows: np.ndarray
    column_map: tuple[Term, ...]

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.column_map]

    @property
    def k(self) -> int:
        return len(self.column_map)


def _encode(data: Dataset, terms: Sequence[Term]) -> np.ndarray:
    out = np.empty((data.n, len(terms)))
    for i, t in enumerate(terms):
        if t.kind == "intercept":
            out[:, i] = 1.0
        elif t.kind == "dummy":
            out[:, i] = data.column(t.column) == t.level_index
        else:
            out[:, i] = (data.column(t.column) - t.center) / t.scale
    return out


def design_matrix(
    data: Dataset,
    columns: Sequence[str] | None = None,
    reference: DesignMatrix | None = None,
) -> DesignMatrix:
    """Main-effects design: intercept, dummies, standardized continuous terms.

    Each categorical column gets one dummy per observed level except the
    first observed level, which is the reference. Levels with no rows and
    constant continuous columns are left out so the matrix has full column
    rank. Passing ``reference`` re-applies an existing encoding (same terms,
    same centering and scaling) to new records.
    """
    if reference is not None:
        return DesignMatrix(_encode(data, reference.column_map), reference.column_map)
    schema = data.schema
    columns = list(schema.names if columns is None else columns)
    terms = [Term("intercept")]
    for name in columns:
        col = schema[name]
        v = data.column(name)
        if col.is_categorical:
            present = np.flatnonzero(np.bincount(v.astype(np.int64), minlength=len(col.levels)))
            for idx in present[1:]:
                terms.append(Term("dummy", name, col.levels[idx], int(idx)))
        else:
            sd = float(v.std())
            if sd > 0:
                terms.append(Term("continuous", name, center=float(v.mean()), scale=sd))
    terms = tuple(terms)
    return DesignMatrix(_encode(data, terms), terms)
