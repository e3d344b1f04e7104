"""Seeded data generators shared by the test modules."""
from __future__ import annotations

import numpy as np

from dpsynth.data import ColumnSpec, Dataset, Schema

MIXED_SCHEMA = Schema((
    ColumnSpec("a", "categorical", levels=("a0", "a1", "a2")),
    ColumnSpec("b", "categorical", levels=("b0", "b1", "b2")),
    ColumnSpec("c", "categorical", levels=("c0", "c1")),
    ColumnSpec("d", "categorical", levels=("d0", "d1")),
    ColumnSpec("e", "categorical", levels=("e0", "e1", "e2")),
    ColumnSpec("f", "categorical", levels=("f0", "f1")),
    ColumnSpec("x", "continuous", min=-6.0, max=6.0, bin_count=8),
    ColumnSpec("y", "continuous", min=-6.0, max=6.0, bin_count=8),
))


def _cut(v, edges):
    return np.searchsorted(edges, v).astype(float)


def mixed_population(n: int, gen: np.random.Generator) -> Dataset:
    """Eight mixed columns driven by one latent factor, so every pair is
    associated and column-wise permutation visibly breaks the joint."""
    z = gen.normal(size=n)
    noise = lambda: gen.normal(scale=0.6, size=n)  # noqa: E731
    cols = [
        _cut(z + noise(), [-0.5, 0.5]),
        _cut(-z + noise(), [-0.4, 0.6]),
        _cut(z + noise(), [0.0]),
        _cut(z + noise(), [0.3]),
        _cut(-z + noise(), [-0.6, 0.2]),
        _cut(z + noise(), [-0.2]),
        np.clip(z + noise(), -6, 6),
        np.clip(-z + noise(), -6, 6),
    ]
    return Dataset.from_columns(MIXED_SCHEMA, cols)


def permute_columns(data: Dataset, gen: np.random.Generator) -> Dataset:
    values = np.column_stack([gen.permutation(data.values[:, j]) for j in range(data.q)])
    return Dataset(data.schema, values)


CAT5_SCHEMA = Schema((
    ColumnSpec("g1", "categorical", levels=tuple(f"g1_{i}" for i in range(6))),
    ColumnSpec("g2", "categorical", levels=tuple(f"g2_{i}" for i in range(5))),
    ColumnSpec("g3", "categorical", levels=tuple(f"g3_{i}" for i in range(8))),
    ColumnSpec("g4", "categorical", levels=tuple(f"g4_{i}" for i in range(4))),
    ColumnSpec("g5", "categorical", levels=tuple(f"g5_{i}" for i in range(6))),
))


def categorical_population(n: int, gen: np.random.Generator) -> Dataset:
    """Five associated categorical columns with skewed level frequencies."""
    z = gen.normal(size=n)
    w = gen.normal(size=n)
    cols = []
    for card, load, other in zip((6, 5, 8, 4, 6), (1.0, 0.8, 0.0, 0.0, -0.9), (0.0, 0.0, 1.0, 0.9, 0.3)):
        latent = load * z + other * w + gen.normal(scale=0.7, size=n)
        edges = np.quantile(latent, np.linspace(0, 1, card + 1)[1:-1] ** 1.5)
        cols.append(_cut(latent, edges))
    return Dataset.from_columns(CAT5_SCHEMA, cols)
