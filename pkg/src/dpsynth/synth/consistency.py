"""Mutual consistency of overlapping noisy tables, and joint reconstruction.

Tables over one column group are made to agree on every shared sub-margin
(including the grand total). Each projection step replaces the implied
sub-margins by their inverse-variance weighted average: with homoscedastic
cell noise, a sub-margin summed from ``m`` cells has variance ``m·σ²``, so
tables are weighted by ``1/m`` and the correction is spread evenly over the
contributing cells. That step is the orthogonal projection onto the
agreement constraint, so cycling over all constraints converges to the
least-squares consistent tables.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .marginals import MarginalTable

log = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-9


def _margin(arr: np.ndarray, cols: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    axes = tuple(i for i, c in enumerate(cols) if c not in keep)
    return arr.sum(axis=axes) if axes else arr


def _project(arrays, cols_list, subset, members) -> float:
    """Make ``members`` agree on ``subset``; return disagreement seen before."""
    margins, sizes = [], []
    for t in members:
        m = _margin(arrays[t], cols_list[t], subset)
        margins.append(m)
        sizes.append(arrays[t].size / max(m.size, 1))
    w = np.array([1.0 / s for s in sizes])
    consensus = sum(wi * mi for wi, mi in zip(w, margins)) / w.sum()
    spread = max(float(np.max(np.abs(m - consensus))) for m in margins)
    for t, m, s in zip(members, margins, sizes):
        cols = cols_list[t]
        delta = (consensus - m) / s
        shape = [arrays[t].shape[i] if c in subset else 1 for i, c in enumerate(cols)]
        arrays[t] += np.reshape(delta, shape)
    return spread


def shared_subsets(cols_list) -> list[tuple[tuple[int, ...], list[int]]]:
    subsets = set()
    for a, b in combinations(range(len(cols_list)), 2):
        subsets.add(tuple(sorted(set(cols_list[a]) & set(cols_list[b]))))
    out = []
    for s in sorted(subsets, key=lambda s: (len(s), s)):
        members = [t for t, cols in enumerate(cols_list) if set(s) <= set(cols)]
        if len(members) > 1:
            out.append((s, members))
    return out


def max_disagreement(tables: list[MarginalTable]) -> float:
    arrays = [t.array() for t in tables]
    cols_list = [t.columns for t in tables]
    worst = 0.0
    for subset, members in shared_subsets(cols_list):
        margins = [_margin(arrays[t], cols_list[t], subset) for t in members]
        for m in margins[1:]:
            worst = max(worst, float(np.max(np.abs(m - margins[0]))))
    return worst


def _sweep_until_consistent(arrays, cols_list, constraints, tol, max_sweeps) -> float:
    spread = 0.0
    for _ in range(max_sweeps):
        spread = 0.0
        for subset, members in constraints:
            spread = max(spread, _project(arrays, cols_list, subset, members))
        if spread < tol:
            break
    return spread


def enforce_consistency(
    tables: list[MarginalTable],
    tol: float = AGREEMENT_TOL,
    max_sweeps: int = 100,
    max_rounds: int = 2000,
) -> list[MarginalTable]:
    """Consistent, nonnegative versions of ``tables``.

    Projection sweeps run until every shared sub-margin agrees within ``tol``
    (or ``max_sweeps``). Negative cells are then clipped to zero and the
    sweeps repeated until both conditions hold together. Finally every table
    is rescaled to the common grand total.
    """
    if not tables:
        return []
    if any(list(t.columns) != sorted(t.columns) for t in tables):
        raise ValueError("table columns must be in ascending order")
    arrays = [t.array().astype(float).copy() for t in tables]
    cols_list = [t.columns for t in tables]
    constraints = shared_subsets(cols_list)
    scale = max(1.0, max(float(np.abs(a).max()) for a in arrays))
    for _ in range(max_rounds):
        _sweep_until_consistent(arrays, cols_list, constraints, tol, max_sweeps)
        lowest = min(float(a.min()) for a in arrays)
        if lowest >= -1e-13 * scale:
            break
        for a in arrays:
            np.maximum(a, 0.0, out=a)
    else:
        log.warning("consistency projection stopped after %d rounds", max_rounds)
    for a in arrays:
        np.maximum(a, 0.0, out=a)
    totals = np.array([a.sum() for a in arrays])
    target = float(totals.mean())
    for a, tot in zip(arrays, totals):
        if tot > 0:
            a *= target / tot
    return [t.with_counts(a) for t, a in zip(tables, arrays)]


@dataclass
class IPFResult:
    probs: np.ndarray
    converged: bool
    iterations: int
    max_error: float


def ipf(
    shape: tuple[int, ...],
    columns: tuple[int, ...],
    tables: list[MarginalTable],
    max_iters: int = 500,
    tol: float = 1e-8,
) -> IPFResult:
    """Fit a joint distribution over ``columns`` to the given table margins.

    Starts from the uniform distribution, so the result is the maximum
    entropy joint matching the targets when they are jointly realizable.
    Targets are normalized to probabilities; convergence is declared when
    every fitted margin is within ``tol`` (L-infinity) of its target.
    """
    pos = {c: i for i, c in enumerate(columns)}
    targets = []
    for t in tables:
        total = t.total
        if total <= 0:
            continue
        axes_keep = tuple(pos[c] for c in t.columns)
        targets.append((axes_keep, t.array() / total))
    joint = np.full(shape, 1.0 / np.prod(shape))
    if not targets:
        return IPFResult(joint.ravel(), True, 0, 0.0)
    ndim = len(shape)
    err = np.inf
    for it in range(1, max_iters + 1):
        for keep, target in targets:
            drop = tuple(i for i in range(ndim) if i not in keep)
            current = joint.sum(axis=drop) if drop else joint
            # the table's column order matches the group order, both sorted
            ratio = np.divide(target, current, out=np.zeros_like(target), where=current > 0)
            joint *= np.expand_dims(ratio, drop) if drop else ratio
        err = 0.0
        for keep, target in targets:
            drop = tuple(i for i in range(ndim) if i not in keep)
            current = joint.sum(axis=drop) if drop else joint
            err = max(err, float(np.max(np.abs(current - target))))
        if err < tol:
            return IPFResult(joint.ravel(), True, it, err)
    return IPFResult(joint.ravel(), False, max_iters, err)
