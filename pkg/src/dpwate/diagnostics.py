"""Numeric diagnostics: normal KL divergence, tail-bound evaluators, M planner."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .exceptions import ParameterError, PlanningError

DEFAULT_A = 0.1
MIN_RECOMMENDED_M = 50


@dataclass(frozen=True)
class KlDiagnostic:
    tau_bar: float
    v_bar: float
    tau: float
    v: float
    u1: float
    u2: float
    u3: float

    @property
    def kl_value(self) -> float:
        return self.u1 + self.u2 + self.u3


def kl_normal(tau_bar: float, v_bar: float, tau: float, v: float) -> KlDiagnostic:
    """KL(N(tau_bar, v_bar) || N(tau, v)) split into its three terms.

    ``u1`` is the mean shift, ``u2 = v_bar/(2v) - 1/2`` and
    ``u3 = -log(v_bar/v)/2``.
    """
    if not (v > 0 and v_bar > 0):
        raise ParameterError("variances must be positive")
    u1 = (tau_bar - tau) ** 2 / (2.0 * v)
    u2 = v_bar / (2.0 * v) - 0.5
    u3 = -0.5 * math.log(v_bar / v)
    return KlDiagnostic(tau_bar, v_bar, tau, v, u1, u2, u3)


def _check_positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise ParameterError(f"{name} must be positive, got {value!r}")


def average_tail_bounds(M, epsilon, pi, c):
    """Asymptotic tail bounds ``(P(|tau_bar - tau| > c), P(|V_bar - V| > c))``."""
    _check_positive(M=M, epsilon=epsilon, c=c)
    if not 0 < pi < 1:
        raise ParameterError("pi must lie in (0, 1)")
    return (
        2.0 * math.exp(-M * epsilon * (1 - pi) * c / 6.0),
        2.0 * math.exp(-M * epsilon * pi * c / 6.0),
    )


def theorem3_bound(M, epsilon, pi, V, c) -> float:
    """Asymptotic bound on ``P(KL > c)`` between private and non-private normals.

    Only meaningful as ``n`` grows; values above 1 are vacuous.
    """
    _check_positive(M=M, epsilon=epsilon, V=V, c=c)
    if not 0 < pi < 1:
        raise ParameterError("pi must lie in (0, 1)")
    first = 2.0 * math.exp(-M * epsilon * (1 - pi) * math.sqrt(2.0 * V * c) / (6.0 * math.sqrt(3.0)))
    second = 4.0 * math.exp(-M * epsilon * pi * V * c / 9.0)
    return first + second


def exceedance_frequency(kl_values, c) -> float:
    """Fraction of Monte Carlo KL values strictly above ``c``."""
    kl_values = np.asarray(kl_values, dtype=float)
    return float(np.mean(kl_values > c))


@dataclass(frozen=True)
class MPlan:
    recommended: int
    full: Optional[int]
    simplified: int
    full_value: Optional[float]
    simplified_value: float
    meets_minimum: bool
    degenerate_risk: Optional[float] = None
    warnings: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "recommended_M": self.recommended,
            "full_formula_M": self.full,
            "simplified_formula_M": self.simplified,
            "full_formula_value": self.full_value,
            "simplified_formula_value": self.simplified_value,
            "meets_minimum_M_50": self.meets_minimum,
            "degenerate_partition_risk": self.degenerate_risk,
            "warnings": list(self.warnings),
        }


def _ceil(x: float) -> int:
    # guard against 80.00000000000001 style rounding
    return max(1, math.ceil(round(x, 9)))


def degenerate_risk(n: int, M: int, treated_fraction: float) -> float:
    """Probability that at least one of ``M`` partitions has < 2 treated or < 2 controls.

    Treats partitions as independent binomial samples of size ``n // M``.
    """
    k = n // M
    q = treated_fraction
    per_part = stats.binom.cdf(1, k, q) + stats.binom.cdf(1, k, 1 - q)
    per_part = min(per_part, 1.0)
    return float(-np.expm1(M * np.log1p(-per_part))) if per_part < 1 else 1.0


def plan_M(
    epsilon: float,
    pi: float,
    a: float = DEFAULT_A,
    n: int = 10000,
    delta: float = 0.1,
    allow_simplified: bool = True,
    treated_fraction: Optional[float] = None,
) -> MPlan:
    """Rule-of-thumb number of partitions for a target margin of error ``delta``.

    Solves ``delta = 2 sqrt(1/(2an) + 4/(M eps (1-pi))^2)`` for ``M``; the
    large-``n`` simplification is ``M = 4/(eps (1-pi) delta)``. When the
    full formula is infeasible (``delta^2/4 <= 1/(2an)``) the simplified value
    is recommended with a warning, or :class:`PlanningError` is raised if
    ``allow_simplified`` is false.
    """
    _check_positive(epsilon=epsilon, n=n, delta=delta)
    if not 0 < pi < 1:
        raise ParameterError("pi must lie in (0, 1)")
    if not 0 < a < 0.5:
        raise ParameterError("a must lie in (0, 1/2)")
    eps_tau = epsilon * (1 - pi)
    simplified_value = 4.0 / (eps_tau * delta)
    slack = delta * delta / 4.0 - 1.0 / (2.0 * a * n)
    notes = []
    if slack > 0:
        full_value = (2.0 / eps_tau) / math.sqrt(slack)
        full = _ceil(full_value)
        recommended = full
    else:
        msg = (
            f"margin of error {delta} is infeasible: need delta^2/4 > 1/(2an) "
            f"({delta * delta / 4:.6g} <= {1 / (2 * a * n):.6g})"
        )
        if not allow_simplified:
            raise PlanningError(msg)
        warnings.warn(msg + "; using the simplified formula")
        notes.append(msg)
        full_value, full = None, None
        recommended = _ceil(simplified_value)
    simplified = _ceil(simplified_value)
    if recommended < MIN_RECOMMENDED_M:
        notes.append(f"M={recommended} is below the suggested minimum of {MIN_RECOMMENDED_M}")
    risk = None
    if treated_fraction is not None:
        if not 0 < treated_fraction < 1:
            raise ParameterError("treated_fraction must lie in (0, 1)")
        if recommended > n:
            notes.append(f"M={recommended} exceeds n={n}")
        else:
            risk = degenerate_risk(n, recommended, treated_fraction)
            if risk > 0.01:
                notes.append(f"estimated probability of a degenerate partition is {risk:.3g}")
    return MPlan(
        recommended=recommended,
        full=full,
        simplified=simplified,
        full_value=full_value,
        simplified_value=simplified_value,
        meets_minimum=recommended >= MIN_RECOMMENDED_M,
        degenerate_risk=risk,
        warnings=tuple(notes),
    )
