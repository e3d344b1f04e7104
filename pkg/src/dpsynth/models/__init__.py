from .cart import DEFAULT_CP_GRID, DEFAULT_MIN_LEAF, CartTree, cv_select_cp, fit_cart
from .design import DesignMatrix, Term, design_matrix
from .glm import (
    ConfidenceInterval,
    FitError,
    FittedGLM,
    fit_glm,
    glm_confidence_intervals,
    predict_glm,
)


def predict_propensity(model, rows):
    """Predicted probabilities: logistic link for GLMs, leaf means for trees."""
    if isinstance(model, FittedGLM):
        return predict_glm(model, rows)
    if isinstance(model, CartTree):
        return model.predict(rows)
    raise TypeError(f"cannot predict with {type(model).__name__}")


__all__ = [
    "DEFAULT_CP_GRID",
    "DEFAULT_MIN_LEAF",
    "CartTree",
    "ConfidenceInterval",
    "DesignMatrix",
    "FitError",
    "FittedGLM",
    "Term",
    "cv_select_cp",
    "design_matrix",
    "fit_cart",
    "fit_glm",
    "glm_confidence_intervals",
    "predict_glm",
    "predict_propensity",
]
