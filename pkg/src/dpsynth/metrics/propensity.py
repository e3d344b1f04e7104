"""Propensity-score distinguishability: pMSE, its null, and SPECKS."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import Dataset, concat
from ..models import DEFAULT_MIN_LEAF, design_matrix, fit_cart, fit_glm, predict_glm
from ..privacy import as_generator

CLASSIFIERS = ("glm", "cart")


class InsufficientRows(ValueError):
    pass


@dataclass
class PropensityRun:
    classifier: str
    scores_original: np.ndarray
    scores_synthetic: np.ndarray
    k: int | None = None
    cp: float | None = None

    @property
    def N(self) -> int:
        return self.scores_original.size + self.scores_synthetic.size

    @property
    def c(self) -> float:
        return self.scores_synthetic.size / self.N

    @property
    def scores(self) -> np.ndarray:
        return np.concatenate([self.scores_original, self.scores_synthetic])


def _fit_predict(data: Dataset, labels: np.ndarray, classifier: str, cp, min_leaf):
    if classifier == "glm":
        X = design_matrix(data)
        fit = fit_glm(X, labels, "logistic")
        return predict_glm(fit, X), X.k
    if classifier == "cart":
        if cp is None:
            raise ValueError("CART propensity scores need a cp value")
        tree = fit_cart(data.values, labels, cp=cp, min_leaf=min_leaf,
                        categorical=data.schema.categorical_mask())
        return tree.predict(data.values), None
    raise ValueError(f"unknown classifier {classifier!r}")


def propensity_scores(
    original: Dataset,
    synthetic: Dataset,
    classifier: str = "glm",
    cp: float | None = None,
    min_leaf: int = DEFAULT_MIN_LEAF,
) -> PropensityRun:
    """Fit original-vs-synthetic membership on the stacked rows, score in sample.

    The GLM has every main effect; the tree works on the raw columns.
    """
    stacked = concat([original, synthetic])
    labels = np.r_[np.zeros(original.n), np.ones(synthetic.n)]
    p, k = _fit_predict(stacked, labels, classifier, cp, min_leaf)
    return PropensityRun(classifier, p[: original.n], p[original.n :], k=k, cp=cp)


def pmse(scores, c: float) -> float:
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("no propensity scores")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    return float(np.mean((scores - c) ** 2))


def null_pmse_parametric(k: int, c: float, N: int) -> float:
    """Expected null pMSE of a k-parameter classifier: ``(k-1)(1-c)²c/N``."""
    if k < 1 or N < 1:
        raise ValueError("k and N must be positive")
    return (k - 1) * (1 - c) ** 2 * c / N


def null_pmse_bootstrap(
    original: Dataset,
    classifier: str = "cart",
    reps: int = 100,
    rng=None,
    cp: float | None = None,
    min_leaf: int = DEFAULT_MIN_LEAF,
) -> float:
    """Null pMSE estimated from the original alone.

    Each repetition draws ``2n`` rows with replacement, labels the first half
    0 and the second half 1, refits the classifier and scores it at
    ``c = 0.5``. Returns the mean over repetitions.
    """
    n = original.n
    if n < 2:
        raise InsufficientRows("insufficient rows for a bootstrap null")
    gen = as_generator(rng) if rng is not None else np.random.default_rng(0)
    labels = np.r_[np.zeros(n), np.ones(n)]
    values = []
    for _ in range(reps):
        sample = original.take(gen.integers(0, n, size=2 * n))
        p, _ = _fit_predict(sample, labels, classifier, cp, min_leaf)
        values.append(pmse(p, 0.5))
    return float(np.mean(values))


def pmse_ratio(observed_mean: float, null_mean: float) -> tuple[float, float]:
    """``(ratio, log ratio)``; the log is ``-inf`` when the observed pMSE is 0."""
    if not null_mean > 0:
        raise ValueError("null pMSE must be positive")
    ratio = observed_mean / null_mean
    return ratio, (math.log(ratio) if ratio > 0 else -math.inf)


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS distance needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def specks(run: PropensityRun) -> float:
    return ks_statistic(run.scores_original, run.scores_synthetic)
