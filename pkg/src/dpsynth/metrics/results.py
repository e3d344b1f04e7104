"""Metric records, the category/orientation registry, and radar rescaling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..privacy import PrivacyParams

CATEGORIES = ("marginal", "joint", "correlation")
SMALLER, LARGER = "smaller-better", "larger-better"

LOG_RATIO_CAP = 12.0
STD_DIFF_CAP = 10.0


class UndefinedMetric(ValueError):
    """The inputs do not support the metric (for example a synthetic outcome
    with no variation). Reported as absent, not as a computation failure."""


@dataclass(frozen=True)
class MetricInfo:
    name: str
    category: str
    orientation: str
    rescale: str  # "unit", "log-ratio", "capped"


# Fixed axis order: categories in order, metrics within each category.
_BASE = [
    MetricInfo("chisq_pvalue_mean", "marginal", LARGER, "unit"),
    MetricInfo("ks_pvalue_mean", "marginal", LARGER, "unit"),
    MetricInfo("nist_classification", "marginal", SMALLER, "unit"),
    MetricInfo("pmse_ratio_glm", "joint", SMALLER, "log-ratio"),
    MetricInfo("specks_glm", "joint", SMALLER, "unit"),
    MetricInfo("pmse_ratio_cart", "joint", SMALLER, "log-ratio"),
    MetricInfo("specks_cart", "joint", SMALLER, "unit"),
    MetricInfo("nist_clustering", "joint", SMALLER, "unit"),
    MetricInfo("nist_regression", "correlation", SMALLER, "unit"),
]
BASE_METRICS = {m.name: m for m in _BASE}


def regression_metrics(model: str) -> list[MetricInfo]:
    return [
        MetricInfo(f"ci_overlap_{model}", "correlation", LARGER, "unit"),
        MetricInfo(f"std_diff_{model}", "correlation", SMALLER, "capped"),
    ]


def metric_info(name: str) -> MetricInfo:
    if name in BASE_METRICS:
        return BASE_METRICS[name]
    for prefix in ("ci_overlap_", "std_diff_"):
        if name.startswith(prefix):
            return {m.name: m for m in regression_metrics(name[len(prefix):])}[name]
    raise KeyError(f"unknown metric {name!r}")


def axis_order(names) -> list[str]:
    """Sort metric names by category, then by registry position."""
    base = list(BASE_METRICS)

    def key(n):
        info = metric_info(n)
        pos = base.index(n) if n in BASE_METRICS else len(base)
        return (CATEGORIES.index(info.category), pos, n)

    return sorted(names, key=key)


@dataclass
class MetricResult:
    name: str
    category: str
    orientation: str
    per_replicate: list[float | None]
    params: PrivacyParams | None = None
    absent_reason: str | None = None
    details: dict = field(default_factory=dict)

    @property
    def absent(self) -> bool:
        return self.absent_reason is not None

    @property
    def value(self) -> float | None:
        vals = [v for v in self.per_replicate if v is not None]
        if self.absent or not vals:
            return None
        return float(np.mean(vals))

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "category": self.category,
            "orientation": self.orientation,
            "value": self.value,
            "per_replicate": self.per_replicate,
            "epsilon": None if self.params is None else self.params.epsilon,
            "delta": None if self.params is None else self.params.delta,
            "absent_reason": self.absent_reason,
        }


def make_result(name: str, per_replicate, params=None, absent_reason=None) -> MetricResult:
    info = metric_info(name)
    vals = [None if v is None else float(v) for v in per_replicate]
    if absent_reason is None and all(v is None for v in vals):
        absent_reason = "no replicate produced a value"
    return MetricResult(info.name, info.category, info.orientation, vals, params, absent_reason)


def rescale(name: str, value: float | None) -> float | None:
    """Map a raw metric value into [0, 1] with 1 = best.

    Bounded smaller-better metrics use ``1 - clip(v)``; larger-better use
    ``clip(v)``. pMSE-ratios use ``1 - clip(max(log r, 0)/12)`` so that any
    ratio at or below 1 (including a perfect copy's zero) is best.
    Standardized differences are capped at 10.
    """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    info = metric_info(name)
    if info.rescale == "log-ratio":
        if value <= 0:
            return 1.0
        return 1.0 - min(max(math.log(value), 0.0) / LOG_RATIO_CAP, 1.0)
    if info.rescale == "capped":
        return 1.0 - min(max(value / STD_DIFF_CAP, 0.0), 1.0)
    clipped = min(max(value, 0.0), 1.0)
    return clipped if info.orientation == LARGER else 1.0 - clipped
