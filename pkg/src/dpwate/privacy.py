"""Subsample-and-aggregate release of a WATE point/variance pair.

The per-partition estimates are averaged, and each average receives
Laplace noise calibrated to its global sensitivity: ``2/M`` for the effect
and ``S_V(a, n_partition)/M`` for the variance, where ``S_V`` is the
per-dataset sensitivity of the truncated variance estimator. The total
budget ``epsilon`` is split as ``(1 - pi) * epsilon`` for the effect and
``pi * epsilon`` for the variance.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import AggregationError, ParameterError
from .wate import Estimand, WateEstimate


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    pi: float = 0.5

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon!r}")
        if not (0 < self.pi < 1):
            raise ParameterError(f"pi must lie in (0, 1), got {self.pi!r}")

    @property
    def epsilon_tau(self) -> float:
        return (1.0 - self.pi) * self.epsilon

    @property
    def epsilon_v(self) -> float:
        return self.pi * self.epsilon


def sensitivity_tau(M: int) -> float:
    """Global sensitivity of the averaged effect estimate."""
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M!r}")
    return 2.0 / M


def sensitivity_v(estimand, a: float, n_partition: int) -> float:
    """Per-dataset sensitivity bound of the truncated variance estimator.

    ``1/(a n)`` for the ATE and ``1/(2 a^2 n)`` for the ATT and ATC.
    """
    estimand = Estimand.parse(estimand)
    if not (0 < a < 0.5):
        raise ParameterError(f"truncation level a must lie in (0, 1/2), got {a!r}")
    if n_partition < 4:
        raise ParameterError(f"partition size must be >= 4, got {n_partition!r}")
    if estimand is Estimand.ATE:
        return 1.0 / (a * n_partition)
    return 1.0 / (2.0 * a * a * n_partition)


@dataclass(frozen=True)
class PartitionEstimates:
    tau: np.ndarray
    v: np.ndarray
    fallback_indices: tuple = ()

    @property
    def M(self) -> int:
        return len(self.tau)

    @property
    def tau_bar(self) -> float:
        return float(np.mean(self.tau))

    @property
    def v_bar(self) -> float:
        return float(np.mean(self.v))


def aggregate(
    estimates: Sequence[Optional[WateEstimate]],
    fallback_rng: Optional[np.random.Generator] = None,
    fallback_v_bound: Optional[float] = None,
) -> PartitionEstimates:
    """Average per-partition estimates.

    ``None`` entries mark degenerate partitions. They are replaced by
    ``tau ~ U[-1, 1]`` and ``v ~ U[0, fallback_v_bound]`` drawn from
    ``fallback_rng``; without an rng, any ``None`` entry is an error.
    """
    M = len(estimates)
    if M == 0:
        raise AggregationError("no partition estimates to aggregate")
    bad = [m for m, est in enumerate(estimates) if est is None]
    if len(bad) == M:
        raise AggregationError(f"all {M} partitions are degenerate")
    if bad and fallback_rng is None:
        raise AggregationError(f"{len(bad)} degenerate partition(s) and the uniform fallback is disabled")
    if bad and not (fallback_v_bound and fallback_v_bound > 0):
        raise ParameterError("fallback_v_bound must be positive when the fallback is used")
    tau = np.empty(M)
    v = np.empty(M)
    for m, est in enumerate(estimates):
        if est is None:
            tau[m] = fallback_rng.uniform(-1.0, 1.0)
            v[m] = fallback_rng.uniform(0.0, fallback_v_bound)
        else:
            tau[m] = est.tau_hat
            v[m] = est.v_hat
    tau.setflags(write=False)
    v.setflags(write=False)
    return PartitionEstimates(tau, v, tuple(bad))


def laplace_inverse_cdf(u, scale: float = 1.0):
    """Quantile function of Laplace(0, scale)."""
    u = np.asarray(u, dtype=float)
    d = u - 0.5
    return -scale * np.sign(d) * np.log1p(-2.0 * np.abs(d))


def laplace_sample(scale: float, rng: np.random.Generator, size=None):
    """Draw from Laplace(0, scale) by inverting the CDF of one uniform per draw."""
    if not (np.isfinite(scale) and scale > 0):
        raise ParameterError(f"Laplace scale must be positive, got {scale!r}")
    u = rng.random(size)
    # u == 0 maps to -inf; redraw from the open interval
    while np.any(u == 0.0):
        if np.ndim(u) == 0:
            u = rng.random()
        else:
            u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    out = laplace_inverse_cdf(u, scale)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PrivateRelease:
    """The only quantities derived from confidential data that may be published."""

    tau_private: float
    v_private: float
    scale_tau: float
    scale_v: float
    estimand: Estimand
    epsilon: float
    pi: float
    M: int
    a: float
    n: int
    n_partition: int
    seed: Optional[int] = None
    used_fallback: bool = False

    @property
    def sensitivity_v(self) -> float:
        return sensitivity_v(self.estimand, self.a, self.n_partition)

    @property
    def v_upper(self) -> float:
        """Upper end of the prior support for the averaged variance."""
        return self.sensitivity_v / 2.0

    @property
    def epsilon_tau(self) -> float:
        return (1.0 - self.pi) * self.epsilon

    @property
    def epsilon_v(self) -> float:
        return self.pi * self.epsilon

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimand"] = self.estimand.value
        d["epsilon_tau"] = self.epsilon_tau
        d["epsilon_v"] = self.epsilon_v
        return d


def noise_scales(budget: PrivacyBudget, estimand, a: float, M: int, n_partition: int):
    """Laplace scales ``(scale_tau, scale_v)`` for the averaged pair."""
    scale_tau = sensitivity_tau(M) / budget.epsilon_tau
    scale_v = sensitivity_v(estimand, a, n_partition) / (M * budget.epsilon_v)
    return scale_tau, scale_v


def privatize(
    agg: PartitionEstimates,
    budget: PrivacyBudget,
    estimand,
    a: float,
    n_partition: int,
    rng_tau: np.random.Generator,
    rng_v: Optional[np.random.Generator] = None,
    *,
    n: Optional[int] = None,
    seed: Optional[int] = None,
) -> PrivateRelease:
    """Add calibrated Laplace noise to the averaged effect and variance.

    ``rng_v`` defaults to ``rng_tau`` (the effect noise is drawn first).
    """
    estimand = Estimand.parse(estimand)
    scale_tau, scale_v = noise_scales(budget, estimand, a, agg.M, n_partition)
    eta_tau = laplace_sample(scale_tau, rng_tau)
    eta_v = laplace_sample(scale_v, rng_v if rng_v is not None else rng_tau)
    return PrivateRelease(
        tau_private=agg.tau_bar + eta_tau,
        v_private=agg.v_bar + eta_v,
        scale_tau=scale_tau,
        scale_v=scale_v,
        estimand=estimand,
        epsilon=budget.epsilon,
        pi=budget.pi,
        M=agg.M,
        a=float(a),
        n=int(n) if n is not None else agg.M * n_partition,
        n_partition=int(n_partition),
        seed=seed,
        used_fallback=bool(agg.fallback_indices),
    )


@dataclass
class PrivacyLedger:
    """Running total of epsilon spent per dataset (sequential composition).

    Thread-safe; optionally persisted to a JSON file so the total survives
    across processes.
    """

    path: Optional[Path] = None
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        if self.path is not None:
            self.path = Path(self.path)
            if self.path.exists():
                self.entries = json.loads(self.path.read_text(encoding="utf-8"))["entries"]

    def record(self, dataset_id: str, epsilon: float, label: str = "") -> dict:
        if not epsilon > 0:
            raise ParameterError("recorded epsilon must be positive")
        with self._lock:
            entry = {"dataset": dataset_id, "epsilon": float(epsilon), "label": label}
            self.entries.append(entry)
            if self.path is not None:
                self.path.write_text(json.dumps({"entries": self.entries}, indent=2), encoding="utf-8")
            return entry

    def record_release(self, dataset_id: str, release: PrivateRelease) -> dict:
        # the split parts sum to epsilon by construction; record the total itself
        return self.record(dataset_id, release.epsilon, release.estimand.value)

    def total(self, dataset_id: str) -> float:
        with self._lock:
            return float(sum(e["epsilon"] for e in self.entries if e["dataset"] == dataset_id))

    def state(self, dataset_id: str) -> dict:
        with self._lock:
            mine = [e for e in self.entries if e["dataset"] == dataset_id]
        return {
            "dataset": dataset_id,
            "releases": len(mine),
            "total_epsilon": float(sum(e["epsilon"] for e in mine)),
        }
