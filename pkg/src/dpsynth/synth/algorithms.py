"""Perturbed-histogram synthesizers.

Both synthesizers separate a measurement stage, the only code that touches
the binned records, from a post-processing stage that sees nothing but noisy
tables and the public schema.

fieldgroups
    Laplace noise on the full joint histogram of each column group, rounding
    to nonnegative integers, a small-count threshold, and sampling each group
    independently in proportion to the surviving counts.

dpsyn
    Gaussian noise on every 1-, 2- and 3-way table inside each group (one
    stacked release), a small-count threshold, consistency projection, and
    iterative proportional fitting of each group joint to its tables.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..data import BinnedView, Dataset, Schema
from ..privacy import (
    HISTOGRAM_L1,
    BudgetAccountant,
    PrivacyParams,
    SeededRng,
    SensitivityBound,
    gaussian_mechanism,
    gaussian_sigma,
    laplace_mechanism,
    parallel_scope,
    split_budget,
    stacked_histogram_l2,
)
from .consistency import enforce_consistency, ipf
from .marginals import GroupingPlan, MarginalTable, build_marginal, realize_rows, sample_group

log = logging.getLogger(__name__)

ALGORITHMS = ("fieldgroups", "dpsyn")

DPSYN_SIGMA_MULTIPLE = 3.0

# sub-stream tags under each replicate stream
_NOISE, _SAMPLE, _REALIZE = 0, 1, 2


@dataclass(frozen=True)
class SynthesisConfig:
    algorithm: str
    params: PrivacyParams
    replicates: int = 1
    synthetic_rows: int | str = "match-original"
    threshold: str | float = "default"
    master_seed: int = 0
    ipf_max_iters: int = 500
    ipf_tol: float = 1e-8

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.synthetic_rows != "match-original":
            if int(self.synthetic_rows) != self.synthetic_rows or self.synthetic_rows < 1:
                raise ValueError("synthetic_rows must be a positive integer or 'match-original'")
        if self.threshold != "default" and not isinstance(self.threshold, (int, float)):
            raise ValueError("threshold must be 'default' or a number")
        if self.algorithm == "dpsyn" and self.params.delta <= 0:
            raise ValueError("dpsyn uses the Gaussian mechanism and needs delta > 0")

    def n_rows(self, n_original: int) -> int:
        return n_original if self.synthetic_rows == "match-original" else int(self.synthetic_rows)


@dataclass
class SyntheticBundle:
    algorithm: str
    replicates: list[Dataset]
    per_replicate_params: PrivacyParams
    ledger: dict
    master_seed: int
    warnings: list[str] = field(default_factory=list)


def fieldgroups_threshold(k: int, epsilon: float, cells: int) -> float:
    """Counts at or below this value are zeroed: ``(k/ε)·log10(cells)``."""
    return k / epsilon * math.log10(cells)


def _group_sampler(
    schema: Schema,
    plan: GroupingPlan,
    joint_by_group: list[np.ndarray],
    n_rows: int,
    rng: SeededRng,
) -> Dataset:
    cells = np.zeros((n_rows, len(schema)), dtype=np.int64)
    for j, (group, probs) in enumerate(zip(plan.groups, joint_by_group)):
        shape = tuple(plan.cardinalities[c] for c in group)
        flat = sample_group(probs, n_rows, rng.child(_SAMPLE, j))
        unpacked = np.unravel_index(flat, shape)
        for c, col_cells in zip(group, unpacked):
            cells[:, c] = col_cells
    return realize_rows(schema, cells, rng.child(_REALIZE))


def _uniform_if_empty(counts: np.ndarray, what: str, warnings: list[str]) -> np.ndarray:
    if counts.sum() > 0:
        return counts
    msg = f"{what}: every count was suppressed; falling back to a uniform distribution"
    log.warning(msg)
    warnings.append(msg)
    return np.ones_like(counts)


def _charge(acct: BudgetAccountant, algorithm: str, plan: GroupingPlan, per_rep: PrivacyParams, m: int):
    """Charge the whole release up front, before any noise is drawn."""
    if algorithm == "fieldgroups":
        per_group = PrivacyParams(per_rep.epsilon / plan.k, 0.0)
        for r in range(m):
            for j, group in enumerate(plan.groups):
                parallel_scope(
                    acct, f"fieldgroups/replicate-{r}/group-{j}", per_group, plan.cells(group)
                )
    else:
        for r in range(m):
            acct.spend(f"dpsyn/replicate-{r}/stacked-marginals", per_rep)


# -- fieldgroups --------------------------------------------------------------


def _measure_fieldgroups(data: BinnedView, plan: GroupingPlan, epsilon_r: float, rng: SeededRng):
    """Noisy joint counts per group. The only fieldgroups code reading records."""
    sens = SensitivityBound(l1=HISTOGRAM_L1)
    noisy = []
    for j, group in enumerate(plan.groups):
        table = build_marginal(data, group, max_cells=plan.cells(group))
        # k sequential releases of eps_r/k each; cells within a group are disjoint
        noisy.append(laplace_mechanism(table.counts, sens, epsilon_r / plan.k, rng.child(_NOISE, j)))
    return noisy


def _postprocess_fieldgroups(noisy, plan: GroupingPlan, epsilon_r: float, threshold, warnings):
    joint = []
    for j, (group, counts) in enumerate(zip(plan.groups, noisy)):
        counts = np.maximum(np.rint(counts), 0.0)
        cut = (
            fieldgroups_threshold(plan.k, epsilon_r, plan.cells(group))
            if threshold == "default"
            else float(threshold)
        )
        counts[counts <= cut] = 0.0
        joint.append(_uniform_if_empty(counts, f"group {j} {group}", warnings))
    return joint


def synth_fieldgroups(
    data: BinnedView,
    plan: GroupingPlan,
    cfg: SynthesisConfig,
    acct: BudgetAccountant,
    rng: SeededRng,
) -> SyntheticBundle:
    if cfg.algorithm != "fieldgroups":
        raise ValueError("config is not for fieldgroups")
    m = cfg.replicates
    per_rep = split_budget(cfg.params, m)
    _charge(acct, "fieldgroups", plan, per_rep, m)
    n_rows = cfg.n_rows(data.n)
    schema = data.schema
    noisy_by_rep = [_measure_fieldgroups(data, plan, per_rep.epsilon, rng.child(r)) for r in range(m)]
    del data
    warnings: list[str] = []
    replicates = []
    for r, noisy in enumerate(noisy_by_rep):
        joint = _postprocess_fieldgroups(noisy, plan, per_rep.epsilon, cfg.threshold, warnings)
        replicates.append(_group_sampler(schema, plan, joint, n_rows, rng.child(r)))
    return SyntheticBundle("fieldgroups", replicates, per_rep, acct.snapshot(), cfg.master_seed, warnings)


# -- dpsyn --------------------------------------------------------------------


def _measure_dpsyn(data: BinnedView, plan: GroupingPlan, params_r: PrivacyParams, rng: SeededRng):
    """One Gaussian release of every 1/2/3-way table, stacked."""
    specs = plan.marginal_specs("dpsyn")
    tables = [build_marginal(data, cols) for group_specs in specs for cols in group_specs]
    stacked = np.concatenate([t.counts for t in tables])
    sens = SensitivityBound(l2=stacked_histogram_l2(len(tables)))
    released = gaussian_mechanism(stacked, sens, params_r, rng.child(_NOISE))
    out, pos = [], 0
    for t in tables:
        size = t.counts.size
        out.append(MarginalTable(t.columns, t.shape, released[pos : pos + size]))
        pos += size
    return out, gaussian_sigma(sens.l2, params_r)


def _postprocess_dpsyn(noisy: list[MarginalTable], sigma: float, plan: GroupingPlan, cfg, warnings):
    cut = DPSYN_SIGMA_MULTIPLE * sigma if cfg.threshold == "default" else float(cfg.threshold)
    by_group: dict[tuple[int, ...], list[MarginalTable]] = {g: [] for g in plan.groups}
    owner = {c: g for g in plan.groups for c in g}
    for t in noisy:
        counts = t.counts.copy()
        counts[counts < cut] = 0.0
        by_group[owner[t.columns[0]]].append(t.with_counts(counts))
    joint = []
    for j, group in enumerate(plan.groups):
        tables = enforce_consistency(by_group[group])
        shape = tuple(plan.cardinalities[c] for c in group)
        if sum(t.total for t in tables) <= 0:
            joint.append(_uniform_if_empty(np.zeros(int(np.prod(shape))), f"group {j} {group}", warnings))
            continue
        fit = ipf(shape, group, tables, max_iters=cfg.ipf_max_iters, tol=cfg.ipf_tol)
        if not fit.converged:
            msg = (
                f"group {j} {group}: IPF did not converge in {fit.iterations} iterations "
                f"(max margin error {fit.max_error:.3g}); using the last iterate"
            )
            log.warning(msg)
            warnings.append(msg)
        joint.append(_uniform_if_empty(fit.probs, f"group {j} {group}", warnings))
    return joint


def synth_dpsyn(
    data: BinnedView,
    plan: GroupingPlan,
    cfg: SynthesisConfig,
    acct: BudgetAccountant,
    rng: SeededRng,
) -> SyntheticBundle:
    if cfg.algorithm != "dpsyn":
        raise ValueError("config is not for dpsyn")
    m = cfg.replicates
    per_rep = split_budget(cfg.params, m)
    _charge(acct, "dpsyn", plan, per_rep, m)
    n_rows = cfg.n_rows(data.n)
    schema = data.schema
    noisy_by_rep = [_measure_dpsyn(data, plan, per_rep, rng.child(r)) for r in range(m)]
    del data
    warnings: list[str] = []
    replicates = []
    for r, (noisy, sigma) in enumerate(noisy_by_rep):
        joint = _postprocess_dpsyn(noisy, sigma, plan, cfg, warnings)
        replicates.append(_group_sampler(schema, plan, joint, n_rows, rng.child(r)))
    return SyntheticBundle("dpsyn", replicates, per_rep, acct.snapshot(), cfg.master_seed, warnings)


def synthesize(data: BinnedView, plan: GroupingPlan, cfg: SynthesisConfig, acct, rng) -> SyntheticBundle:
    fn = synth_fieldgroups if cfg.algorithm == "fieldgroups" else synth_dpsyn
    return fn(data, plan, cfg, acct, rng)
