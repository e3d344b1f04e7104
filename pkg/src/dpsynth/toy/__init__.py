"""A small census-like dataset bundled for demos and end-to-end runs.

``original.csv`` and ``public.csv`` are independent draws from the same
generator, so the public file can drive variable grouping without touching
the original.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..data import Dataset, load_schema

HERE = Path(__file__).resolve().parent
CODEBOOK = HERE / "codebook.txt"
ORIGINAL = HERE / "original.csv"
PUBLIC = HERE / "public.csv"
CONFIG = HERE / "toy.ini"

CITIES = 6


def toy_schema():
    return load_schema(CODEBOOK.read_text(encoding="utf-8"))


def make_toy(n: int = 5000, seed: int = 0) -> Dataset:
    gen = np.random.default_rng(seed)
    schema = toy_schema()
    city = gen.choice(CITIES, size=n, p=[0.3, 0.2, 0.15, 0.15, 0.1, 0.1])
    gender = gen.integers(0, 2, size=n)
    age = np.clip(gen.normal(42, 13, size=n), 18, 80)
    edu = np.clip(np.round(gen.normal(1.4 + 0.15 * (city % 3), 0.9, size=n)), 0, 3).astype(int)
    hours = np.clip(gen.normal(30 + 6 * gender + 2 * edu, 9, size=n), 0, 80)

    city_level = np.array([1.3, 1.0, 0.9, 1.1, 0.8, 0.95])[city]
    gap = np.array([0.10, 0.25, 0.05, 0.18, 0.30, 0.0])[city]
    log_wage = (
        9.6 + 0.25 * edu + 0.012 * (age - 18) + 0.02 * hours
        + gap * gender + np.log(city_level) + gen.normal(0, 0.45, size=n)
    )
    wage = np.clip(np.exp(log_wage), 0, 200_000)

    eta = -1.0 + 0.6 * edu - 0.03 * (age - 42) + 0.3 * gender
    employed = (gen.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    rate = np.exp(-0.8 + 0.02 * (age - 18) - 0.15 * edu)
    children = np.minimum(gen.poisson(rate), 4)

    cols = [city, gender, age, edu, hours, wage, employed, children]
    return Dataset.from_columns(schema, [np.asarray(c, dtype=float) for c in cols])


def write_toy_files(n: int = 5000) -> None:
    """Regenerate the bundled CSVs (original from seed 1, public from seed 2)."""
    ORIGINAL.write_text(make_toy(n, seed=1).to_csv(), encoding="utf-8")
    PUBLIC.write_text(make_toy(n, seed=2).to_csv(), encoding="utf-8")


if __name__ == "__main__":
    write_toy_files()
