from .correlation import (
    CorrelationResult,
    RegressionSpec,
    ci_overlap,
    correlation_metrics,
    std_coef_diff,
)
from .marginal import (
    PValue,
    chisq_homogeneity,
    ks_test,
    marginal_chisq_pvalue,
    marginal_ks_pvalue,
    marginal_means,
)
from .nist import draw_classification_query, gini, nist_classification, nist_clustering, nist_regression, total_variation
from .propensity import (
    InsufficientRows,
    PropensityRun,
    ks_statistic,
    null_pmse_bootstrap,
    null_pmse_parametric,
    pmse,
    pmse_ratio,
    propensity_scores,
    specks,
)
from .results import CATEGORIES, MetricResult, UndefinedMetric, axis_order, make_result, metric_info, rescale

__all__ = [
    "CATEGORIES",
    "CorrelationResult",
    "InsufficientRows",
    "MetricResult",
    "PValue",
    "PropensityRun",
    "RegressionSpec",
    "UndefinedMetric",
    "axis_order",
    "chisq_homogeneity",
    "ci_overlap",
    "correlation_metrics",
    "draw_classification_query",
    "gini",
    "ks_statistic",
    "ks_test",
    "make_result",
    "marginal_chisq_pvalue",
    "marginal_ks_pvalue",
    "marginal_means",
    "metric_info",
    "nist_classification",
    "nist_clustering",
    "nist_regression",
    "null_pmse_bootstrap",
    "null_pmse_parametric",
    "pmse",
    "pmse_ratio",
    "propensity_scores",
    "rescale",
    "specks",
    "std_coef_diff",
    "total_variation",
]
