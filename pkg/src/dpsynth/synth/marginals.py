from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..data import DEFAULT_MAX_CELLS, BinnedView, Dataset, Schema
from ..privacy import as_generator


class CellBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class GroupingPlan:
    """Disjoint column groups; each group is synthesized from its own tables."""

    groups: tuple[tuple[int, ...], ...]
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        flat = [j for g in self.groups for j in g]
        if sorted(flat) != list(range(len(self.cardinalities))):
            raise ValueError("groups must partition the schema columns")

    @property
    def k(self) -> int:
        return len(self.groups)

    def cells(self, group: tuple[int, ...]) -> int:
        return math.prod(self.cardinalities[j] for j in group)

    def marginal_specs(self, algorithm: str) -> list[list[tuple[int, ...]]]:
        """Per group, the column tuples whose tables get measured."""
        if algorithm == "fieldgroups":
            return [[g] for g in self.groups]
        if algorithm == "dpsyn":
            out = []
            for g in self.groups:
                specs = []
                for order in range(1, min(3, len(g)) + 1):
                    specs.extend(combinations(g, order))
                out.append(specs)
            return out
        raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class MarginalTable:
    columns: tuple[int, ...]
    shape: tuple[int, ...]
    counts: np.ndarray = field(repr=False)
    n_source: float = 0.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float).ravel()
        if self.counts.size != math.prod(self.shape):
            raise ValueError("counts length does not match the table shape")

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def array(self) -> np.ndarray:
        return self.counts.reshape(self.shape)

    def with_counts(self, counts) -> "MarginalTable":
        return MarginalTable(self.columns, self.shape, np.asarray(counts, dtype=float), self.n_source)


def cell_index(rows: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Row-major flat cell index of each row."""
    if len(shape) == 1:
        return rows[:, 0]
    return np.ravel_multi_index(tuple(rows.T), shape)


def build_marginal(
    data: BinnedView, columns: tuple[int, ...], max_cells: int = DEFAULT_MAX_CELLS
) -> MarginalTable:
    columns = tuple(columns)
    if not columns:
        raise ValueError("a marginal needs at least one column")
    shape = tuple(data.cardinalities[j] for j in columns)
    size = math.prod(shape)
    if size > max_cells:
        raise CellBudgetError(f"marginal over {columns} has {size} cells (limit {max_cells})")
    idx = cell_index(data.rows[:, list(columns)], shape)
    counts = np.bincount(idx, minlength=size).astype(float)
    return MarginalTable(columns, shape, counts, float(data.n))


def sample_group(joint_probs, n_rows: int, rng) -> np.ndarray:
    """``n_rows`` iid cell indices drawn by inverse-CDF lookup."""
    p = np.asarray(joint_probs, dtype=float).ravel()
    if (p < 0).any() or not np.isfinite(p).all():
        raise ValueError("cell probabilities must be finite and nonnegative")
    total = p.sum()
    if total <= 0:
        raise ValueError("all cell probabilities are zero; apply a fallback first")
    cdf = np.cumsum(p / total)
    cdf[-1] = 1.0
    u = as_generator(rng).random(n_rows)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def realize_rows(schema: Schema, cells: np.ndarray, rng) -> Dataset:
    """Turn binned synthetic rows into records.

    Categorical cells are level indices already; continuous bins are realized
    as uniform draws inside the bin interval.
    """
    gen = as_generator(rng)
    values = cells.astype(float)
    for j, col in enumerate(schema):
        if not col.is_categorical:
            u = gen.random(cells.shape[0])
            v = col.min + (cells[:, j] + u) * col.bin_width
            values[:, j] = np.clip(v, col.min, col.max)
    return Dataset(schema, values)
