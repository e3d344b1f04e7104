"""Logistic and Poisson regression by iteratively reweighted least squares."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .design import DesignMatrix

log = logging.getLogger(__name__)

FAMILIES = ("logistic", "poisson")
RIDGE = 1e-8
# |beta| beyond this on the logit scale means fitted probabilities within
# e^-30 of 0 or 1: treated as separation.
_SEPARATION_BOUND = 30.0
# a linear predictor past this puts a fitted probability within 1e-10 of
# 0 or 1, which only happens when the data (quasi-)separate
_EXTREME_ETA = 23.0


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class FittedGLM:
    family: str
    coefficients: np.ndarray
    standard_errors: np.ndarray
    converged: bool
    iterations: int
    names: list[str] = field(default_factory=list)
    separated: bool = False
    ridge: bool = False
    loglik: float = float("nan")
    ci_level: float = 0.95

    @property
    def k(self) -> int:
        return len(self.coefficients)


def _mean(family: str, eta: np.ndarray) -> np.ndarray:
    if family == "logistic":
        return expit(eta)
    return np.exp(np.minimum(eta, 700.0))


def loglik(family: str, X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    if family == "logistic":
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    mu = np.exp(eta)
    return float(np.sum(y * eta - mu))  # drops the constant -log(y!)


def score(family: str, X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return X.T @ (y - _mean(family, X @ beta))


def _information(family: str, X, beta) -> np.ndarray:
    mu = _mean(family, X @ beta)
    w = mu * (1 - mu) if family == "logistic" else mu
    return X.T @ (w[:, None] * X)


def _solve(H: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, bool]:
    if np.linalg.cond(H) < 1e12:
        try:
            return np.linalg.solve(H, g), False
        except np.linalg.LinAlgError:
            pass
    return np.linalg.solve(H + RIDGE * np.eye(H.shape[0]), g), True


def fit_glm(
    X: DesignMatrix | np.ndarray,
    y,
    family: str = "logistic",
    max_iter: int = 50,
    tol: float = 1e-8,
) -> FittedGLM:
    """Maximum likelihood fit by Newton-Raphson (IRLS; canonical links).

    Standard errors come from the inverse Fisher information at the
    estimate. A singular information matrix falls back to a ``1e-8`` ridge
    and flags ``ridge``. If a coefficient runs off past the separation bound
    the fit stops at the last iterate inside it and flags ``separated``.
    """
    if family not in FAMILIES:
        raise FitError(f"unknown family {family!r}")
    names = X.names if isinstance(X, DesignMatrix) else [f"x{i}" for i in range(np.shape(X)[1])]
    X = X.rows if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if y.shape != (n,):
        raise FitError("response length does not match the design")
    if family == "logistic" and not np.isin(y, (0.0, 1.0)).all():
        raise FitError("logistic response must be 0/1")
    if family == "poisson" and (y < 0).any():
        raise FitError("Poisson response must be nonnegative")

    # standard starting point: one weighted least-squares solve from mu0
    if family == "logistic":
        mu = (y + 0.5) / 2
        eta = np.log(mu / (1 - mu))
        w = mu * (1 - mu)
    else:
        mu = (y + y.mean()) / 2 + 1e-3
        eta = np.log(mu)
        w = mu
    z = eta + (y - mu) / w
    beta, used_ridge = _solve(X.T @ (w[:, None] * X), X.T @ (w * z))
    ll = loglik(family, X, y, beta)

    converged = separated = False
    it = 0
    for it in range(1, max_iter + 1):
        H = _information(family, X, beta)
        step, ridge_now = _solve(H, score(family, X, y, beta))
        used_ridge |= ridge_now
        new = beta + step
        new_ll = loglik(family, X, y, new)
        halvings = 0
        while not new_ll >= ll - 1e-10 * abs(ll) and halvings < 30:
            step /= 2
            new = beta + step
            new_ll = loglik(family, X, y, new)
            halvings += 1
        # complete separation drives a coefficient off; quasi-separation drives
        # some linear predictors off while coefficients creep up slowly
        if family == "logistic" and (
            np.max(np.abs(new)) > _SEPARATION_BOUND or np.max(np.abs(X @ new)) > _EXTREME_ETA
        ):
            separated = True
            break
        beta, ll = new, new_ll
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    if used_ridge:
        warnings.warn("singular information matrix; fitted with a 1e-8 ridge", RuntimeWarning, stacklevel=2)
    H = _information(family, X, beta)
    cov = np.linalg.inv(H + RIDGE * np.eye(k)) if used_ridge else np.linalg.pinv(H)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FittedGLM(
        family=family,
        coefficients=beta,
        standard_errors=se,
        converged=converged,
        iterations=it,
        names=list(names),
        separated=separated,
        ridge=used_ridge,
        loglik=ll,
    )


def glm_confidence_intervals(fit: FittedGLM) -> list[ConfidenceInterval]:
    if not fit.converged:
        raise FitError("confidence intervals need a converged fit")
    z = float(norm.ppf(0.5 + fit.ci_level / 2))
    return [
        ConfidenceInterval(b - z * s, b + z * s)
        for b, s in zip(fit.coefficients, fit.standard_errors)
    ]


def predict_glm(fit: FittedGLM, X: DesignMatrix | np.ndarray) -> np.ndarray:
    X = X.rows if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    return _mean(fit.family, X @ fit.coefficients)
