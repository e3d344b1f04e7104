"""Inferential agreement of regression fits on original vs synthetic data."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, Schema
from ..models import ConfidenceInterval, design_matrix, fit_glm, glm_confidence_intervals


@dataclass(frozen=True)
class RegressionSpec:
    name: str
    family: str
    outcome: str
    predictors: tuple[str, ...]
    positive_level: str | None = None

    def validate(self, schema: Schema) -> None:
        if self.family not in ("logistic", "poisson"):
            raise ValueError(f"{self.name}: unknown family {self.family!r}")
        names = set(schema.names)
        missing = [c for c in (self.outcome, *self.predictors) if c not in names]
        if missing:
            raise ValueError(f"{self.name}: unknown columns {missing}")
        if self.outcome in self.predictors:
            raise ValueError(f"{self.name}: outcome is also a predictor")
        col = schema[self.outcome]
        if self.family == "logistic":
            if not col.is_categorical:
                raise ValueError(f"{self.name}: logistic outcome must be categorical")
            if self.positive_level is None and len(col.levels) != 2:
                raise ValueError(f"{self.name}: name a positive_level for a non-binary outcome")
            if self.positive_level is not None and self.positive_level not in col.levels:
                raise ValueError(f"{self.name}: unknown level {self.positive_level!r}")

    def response(self, data: Dataset) -> np.ndarray:
        col = data.schema[self.outcome]
        v = data.column(self.outcome)
        if self.family == "logistic":
            level = self.positive_level if self.positive_level is not None else col.levels[-1]
            return (v == col.levels.index(level)).astype(float)
        return v.copy()  # categorical counts use the level index


@dataclass
class CorrelationResult:
    name: str
    mean_ci_overlap: float | None = None
    mean_ci_overlap_clamped: float | None = None
    mean_std_diff: float | None = None
    absent_reason: str | None = None
    undefined: bool = False
    coefficients: list[dict] = field(default_factory=list)

    @property
    def absent(self) -> bool:
        return self.absent_reason is not None


def ci_overlap(orig: ConfidenceInterval, synth: ConfidenceInterval) -> tuple[float, float]:
    """Interval overlap, raw and clamped at 0. Identical intervals give 1."""
    wo, ws = orig.upper - orig.lower, synth.upper - synth.lower
    if not (wo > 0 and ws > 0):
        raise ValueError("confidence intervals must have positive width")
    inner = min(orig.upper, synth.upper) - max(orig.lower, synth.lower)
    raw = 0.5 * (inner / wo + inner / ws)
    return raw, max(raw, 0.0)


def std_coef_diff(beta_o: float, beta_s: float, se_o: float) -> float:
    if not se_o > 0:
        raise ValueError("original standard error must be positive")
    return abs(beta_o - beta_s) / se_o


def _evaluate(spec: RegressionSpec, orig: Dataset, synth: Dataset) -> CorrelationResult:
    spec.validate(orig.schema)
    y_o, y_s = spec.response(orig), spec.response(synth)
    if np.ptp(y_s) == 0:
        return CorrelationResult(spec.name, absent_reason="no outcome variation", undefined=True)
    if np.ptp(y_o) == 0:
        return CorrelationResult(spec.name, absent_reason="no outcome variation in original", undefined=True)
    X_o = design_matrix(orig, spec.predictors)
    X_s = design_matrix(synth, reference=X_o)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit_o = fit_glm(X_o, y_o, spec.family)
        fit_s = fit_glm(X_s, y_s, spec.family)
    if not fit_o.converged:
        return CorrelationResult(spec.name, absent_reason="original fit did not converge")
    if fit_s.separated:
        return CorrelationResult(spec.name, absent_reason="separation in the synthetic fit", undefined=True)
    if not fit_s.converged:
        return CorrelationResult(spec.name, absent_reason="synthetic fit did not converge")
    ci_o = glm_confidence_intervals(fit_o)
    ci_s = glm_confidence_intervals(fit_s)
    raw, clamped, diffs, rows = [], [], [], []
    for name, b_o, b_s, se_o, a, b in zip(
        X_o.names, fit_o.coefficients, fit_s.coefficients, fit_o.standard_errors, ci_o, ci_s
    ):
        io, io_c = ci_overlap(a, b)
        d = std_coef_diff(b_o, b_s, se_o)
        raw.append(io)
        clamped.append(io_c)
        diffs.append(d)
        rows.append({"term": name, "beta_original": float(b_o), "beta_synthetic": float(b_s),
                     "ci_overlap": io, "std_diff": d})
    return CorrelationResult(
        spec.name,
        mean_ci_overlap=float(np.mean(raw)),
        mean_ci_overlap_clamped=float(np.mean(clamped)),
        mean_std_diff=float(np.mean(diffs)),
        coefficients=rows,
    )


def correlation_metrics(
    orig: Dataset, synth: Dataset, specs: list[RegressionSpec]
) -> dict[str, CorrelationResult]:
    """Mean CI overlap and standardized coefficient difference per model,
    averaged over all coefficients including the intercept."""
    out = {}
    for spec in specs:
        try:
            out[spec.name] = _evaluate(spec, orig, synth)
        except ValueError as exc:
            out[spec.name] = CorrelationResult(spec.name, absent_reason=str(exc))
    return out
