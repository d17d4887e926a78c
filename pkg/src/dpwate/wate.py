"""Weighted average treatment effect estimators for binary outcomes.

Hajek (ratio) estimators of the ATE, ATT and ATC together with the
large-sample variance approximation that plugs per-arm outcome variances
``v_z(x)`` into the target-population weights ``t(x)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSubsetError, FitError
from .propensity import PropensityScores, fit_logistic


class Estimand(str, enum.Enum):
    ATE = "ATE"
    ATT = "ATT"
    ATC = "ATC"

    @classmethod
    def parse(cls, value) -> "Estimand":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown estimand {value!r}; expected ATE, ATT or ATC") from None

    def tilt(self, e: np.ndarray) -> np.ndarray:
        """Target-population function t(x) evaluated at scores ``e``."""
        if self is Estimand.ATE:
            return np.ones_like(e)
        if self is Estimand.ATT:
            return e
        return 1.0 - e

    def weights(self, e: np.ndarray):
        """Return ``(w0, w1)`` = ``(t/(1-e), t/e)``."""
        t = self.tilt(e)
        return t / (1.0 - e), t / e


ALL_ESTIMANDS = (Estimand.ATE, Estimand.ATT, Estimand.ATC)


def variance_half_bound(estimand, a: float, n: int) -> float:
    """Largest value the truncated variance estimator can take on ``n`` records."""
    estimand = Estimand.parse(estimand)
    if estimand is Estimand.ATE:
        return 1.0 / (2.0 * a * n)
    return 1.0 / (4.0 * a * a * n)


@dataclass(frozen=True)
class OutcomeVarianceModel:
    """How ``v_1(x)`` and ``v_0(x)`` are estimated.

    ``fitted`` regresses y on x separately in each arm (logistic) and uses
    p(1-p); an arm whose fit fails falls back to the conservative 1/4, and an
    arm with a constant outcome gets 0.
    """

    mode: str = "fitted"

    def __post_init__(self):
        if self.mode not in ("fitted", "conservative"):
            raise ValueError(f"unknown outcome variance mode {self.mode!r}")

    def variances(self, subset):
        """Return ``(v0, v1)`` evaluated at every record of ``subset``."""
        n = subset.n
        quarter = np.full(n, 0.25)
        if self.mode == "conservative":
            return quarter, quarter.copy()
        out = []
        for arm in (0, 1):
            mask = subset.treatments == arm
            y_arm = subset.outcomes[mask]
            if y_arm.size and y_arm.min() == y_arm.max():
                # a constant arm has fitted probability 0 or 1 everywhere
                out.append(np.zeros(n))
                continue
            try:
                model = fit_logistic(subset.covariates[mask], subset.outcomes[mask])
            except FitError:
                out.append(quarter.copy())
                continue
            p = model.predict(subset.covariates)
            out.append(p * (1.0 - p))
        return out[0], out[1]


CONSERVATIVE = OutcomeVarianceModel("conservative")
FITTED = OutcomeVarianceModel("fitted")


def _arms(subset):
    z = subset.treatments.astype(bool)
    if z.all() or not z.any():
        raise DegenerateSubsetError(
            f"subset needs treated and control records (treated={int(z.sum())}, n={z.size})"
        )
    return z


def _scores(scores):
    return scores.truncated if isinstance(scores, PropensityScores) else np.asarray(scores, dtype=float)


def estimate_tau(subset, scores, estimand) -> float:
    """Ratio-of-weighted-sums treatment effect estimate."""
    estimand = Estimand.parse(estimand)
    z = _arms(subset)
    e = _scores(scores)
    y = subset.outcomes.astype(float)
    w0, w1 = estimand.weights(e)
    # each weighted mean lies in [0, 1]; the clip only removes rounding overshoot
    treated = min(1.0, np.dot(w1[z], y[z]) / w1[z].sum())
    control = min(1.0, np.dot(w0[~z], y[~z]) / w0[~z].sum())
    return float(treated - control)


def estimate_variance(subset, scores, estimand, varmodel: OutcomeVarianceModel = FITTED, v=None) -> float:
    """Estimated variance ``sum t^2 (v1/e + v0/(1-e)) / (sum t)^2``.

    ``v`` may carry precomputed ``(v0, v1)`` so the outcome models are not
    refitted for every estimand.
    """
    estimand = Estimand.parse(estimand)
    _arms(subset)
    e = _scores(scores)
    v0, v1 = v if v is not None else varmodel.variances(subset)
    t = estimand.tilt(e)
    return float(np.sum(t * t * (v1 / e + v0 / (1.0 - e))) / np.sum(t) ** 2)


@dataclass(frozen=True)
class WateEstimate:
    tau_hat: float
    v_hat: float
    n_used: int
    estimand: Estimand
    a: float

    def confidence_interval(self, z: float = 1.96):
        half = z * np.sqrt(self.v_hat)
        return self.tau_hat - half, self.tau_hat + half


def estimate_pair(subset, scores, estimand, varmodel: OutcomeVarianceModel = FITTED, v=None) -> WateEstimate:
    estimand = Estimand.parse(estimand)
    tau = estimate_tau(subset, scores, estimand)
    var = estimate_variance(subset, scores, estimand, varmodel, v=v)
    a = scores.a if isinstance(scores, PropensityScores) else 0.0
    return WateEstimate(tau, var, subset.n, estimand, a)
