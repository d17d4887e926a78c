"""Logistic propensity models fitted by IRLS, and score truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import FitError, ParameterError

MAX_ITER = 100
GRAD_TOL = 1e-8
PROB_EPS = 1e-10


@dataclass(frozen=True)
class PropensityModel:
    coefficients: np.ndarray  # intercept first
    converged: bool
    iterations: int
    final_gradient_norm: float

    def linear_predictor(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(len(x), -1)
        return self.coefficients[0] + x @ self.coefficients[1:]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return expit(self.linear_predictor(x))


def _design(x):
    x = np.asarray(x, dtype=float)
    x = x.reshape(len(x), -1)
    return np.column_stack([np.ones(len(x)), x])


def fit_logistic(x, target, max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> PropensityModel:
    """Maximum-likelihood logistic regression of ``target`` on ``(1, x)``.

    Newton-Raphson (IRLS) from the zero vector. Raises :class:`FitError` on
    rank deficiency or (quasi-)separation; a fit that simply runs out of
    iterations is returned with ``converged=False``.
    """
    X = _design(x)
    t = np.asarray(target, dtype=float)
    n, k = X.shape
    if n < k or np.linalg.matrix_rank(X) < k:
        raise FitError(f"design matrix is rank deficient (n={n}, columns={k})")
    if t.min() == t.max():
        raise FitError("outcome of the logistic fit is constant")

    beta = np.zeros(k)
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        prob = expit(X @ beta)
        grad = X.T @ (t - prob)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            # a vanishing gradient with saturated probabilities is divergence, not an optimum
            if np.any((prob < PROB_EPS) | (prob > 1 - PROB_EPS)):
                raise FitError("separation: fitted probabilities reached 0 or 1")
            return PropensityModel(beta, True, it - 1, grad_norm)
        w = prob * (1 - prob)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise FitError("singular information matrix (separation or collinearity)") from None
        if not np.all(np.isfinite(step)):
            raise FitError("non-finite Newton step")
        beta = beta + step
    prob = expit(X @ beta)
    grad_norm = float(np.linalg.norm(X.T @ (t - prob)))
    if np.any((prob < PROB_EPS) | (prob > 1 - PROB_EPS)):
        raise FitError("separation: no finite maximiser of the likelihood")
    return PropensityModel(beta, grad_norm <= tol, max_iter, grad_norm)


def fit_propensity(data) -> PropensityModel:
    """Logistic regression of treatment on all covariates of ``data``."""
    return fit_logistic(data.covariates, data.treatments)


@dataclass(frozen=True)
class PropensityScores:
    raw: np.ndarray
    truncated: np.ndarray
    a: float


def check_truncation(a):
    if not (0 < a < 0.5):
        raise ParameterError(f"truncation level a must lie in (0, 1/2), got {a!r}")
    return float(a)


def truncate(scores, a: float) -> np.ndarray:
    """Clamp scores into ``[a, 1 - a]``."""
    a = check_truncation(a)
    return np.clip(np.asarray(scores, dtype=float), a, 1 - a)


def predict_scores(model: PropensityModel, data, a) -> PropensityScores:
    """Raw and truncated propensity scores; ``a=None`` disables truncation."""
    raw = model.predict(data.covariates)
    if a is None:
        return PropensityScores(raw, raw, 0.0)
    return PropensityScores(raw, truncate(raw, a), float(a))


def scores_from_values(raw, a=None) -> PropensityScores:
    raw = np.asarray(raw, dtype=float)
    if np.any((raw <= 0) | (raw >= 1)):
        raise ParameterError("propensity scores must lie strictly inside (0, 1)")
    if a is None:
        return PropensityScores(raw, raw, 0.0)
    return PropensityScores(raw, truncate(raw, a), float(a))
