"""Univariate distribution comparisons, reported as p-values."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, kstwobign

from ..data import Dataset
from .propensity import ks_statistic


@dataclass(frozen=True)
class PValue:
    value: float
    statistic: float
    degenerate: bool = False


def chisq_homogeneity(orig_col, synth_col, n_levels: int | None = None) -> PValue:
    """Two-sample homogeneity test on a 2×L table (no continuity correction).

    Levels unused by both samples are dropped. With fewer than two levels
    left there is nothing to distinguish and the p-value is 1.
    """
    a = np.asarray(orig_col).astype(np.int64)
    b = np.asarray(synth_col).astype(np.int64)
    L = n_levels or int(max(a.max(initial=0), b.max(initial=0)) + 1)
    table = np.vstack([np.bincount(a, minlength=L), np.bincount(b, minlength=L)]).astype(float)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2 or (table.sum(axis=1) == 0).any():
        return PValue(1.0, 0.0, degenerate=True)
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    return PValue(float(chi2.sf(stat, table.shape[1] - 1)), stat)


def marginal_chisq_pvalue(orig_col, synth_col, n_levels: int | None = None) -> float:
    return chisq_homogeneity(orig_col, synth_col, n_levels).value


def ks_test(orig_col, synth_col) -> PValue:
    """KS distance with the asymptotic Kolmogorov p-value at ``n·m/(n+m)``."""
    n, m = len(orig_col), len(synth_col)
    d = ks_statistic(orig_col, synth_col)
    ne = n * m / (n + m)
    return PValue(float(kstwobign.sf(math.sqrt(ne) * d)), d)


def marginal_ks_pvalue(orig_col, synth_col) -> float:
    return ks_test(orig_col, synth_col).value


def marginal_means(orig: Dataset, synth: Dataset) -> tuple[float | None, float | None]:
    """Mean χ² p-value over categorical columns and mean KS p-value over
    continuous ones. A kind with no columns gives ``None``."""
    if orig.schema != synth.schema:
        raise ValueError("datasets have different schemas")
    chis, kss = [], []
    for j, col in enumerate(orig.schema):
        if col.is_categorical:
            chis.append(marginal_chisq_pvalue(orig.values[:, j], synth.values[:, j], len(col.levels)))
        else:
            kss.append(marginal_ks_pvalue(orig.values[:, j], synth.values[:, j]))
    return (
        float(np.mean(chis)) if chis else None,
        float(np.mean(kss)) if kss else None,
    )
