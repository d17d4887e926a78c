"""End-to-end private WATE estimation and its non-private comparator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from ._rng import stream
from .dataset import CausalDataset, partition_health, random_partition
from .exceptions import FitError, ParameterError
from .posterior import PosteriorConfig, PosteriorSummary, summarize
from .privacy import (
    PartitionEstimates,
    PrivacyBudget,
    PrivacyLedger,
    PrivateRelease,
    aggregate,
    privatize,
    sensitivity_v,
)
from .propensity import PropensityModel, check_truncation, fit_propensity, predict_scores
from .wate import FITTED, Estimand, OutcomeVarianceModel, WateEstimate, estimate_pair


@dataclass(frozen=True)
class PartitionFit:
    subset: CausalDataset
    model: PropensityModel
    scores: object
    v: tuple


def fit_partitions(data: CausalDataset, parts, a: float, varmodel: OutcomeVarianceModel = FITTED):
    """Propensity and outcome-variance fits for each partition.

    Returns a list with ``None`` for partitions that are degenerate (fewer
    than two treated or control records) or whose propensity fit fails.
    """
    health = partition_health(data, parts)
    fits = []
    for m, idx in enumerate(parts.groups()):
        if health.degenerate_flags[m]:
            fits.append(None)
            continue
        subset = data.subset(idx)
        try:
            model = fit_propensity(subset)
        except FitError:
            fits.append(None)
            continue
        scores = predict_scores(model, subset, a)
        fits.append(PartitionFit(subset, model, scores, varmodel.variances(subset)))
    return fits


def partition_estimates(fits, estimand) -> list:
    return [
        None if f is None else estimate_pair(f.subset, f.scores, estimand, v=f.v) for f in fits
    ]


@dataclass(frozen=True)
class DPWateResult:
    release: PrivateRelease
    summary: PosteriorSummary
    # confidential; callers must not publish this
    debug: PartitionEstimates


def validate_parameters(M, a, epsilon, pi, n: Optional[int] = None) -> PrivacyBudget:
    """Check every public parameter; raises :class:`ParameterError`."""
    budget = PrivacyBudget(epsilon, pi)
    check_truncation(a)
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        raise ParameterError(f"M must be a positive integer, got {M!r}")
    if n is not None:
        if M > n:
            raise ParameterError(f"M={M} exceeds the number of records n={n}")
        if n // M < 4:
            raise ParameterError(f"partitions of size {n // M} are too small (need >= 4)")
    return budget


def dp_wate(
    data: CausalDataset,
    estimands: Iterable = ("ATE",),
    M: int = 100,
    a: float = 0.05,
    epsilon: float = 1.0,
    pi: float = 0.5,
    seed: int = 0,
    posterior: Optional[PosteriorConfig] = None,
    allow_fallback: bool = False,
    varmodel: OutcomeVarianceModel = FITTED,
    ledger: Optional[PrivacyLedger] = None,
) -> dict:
    """Run the private estimator once for each requested estimand.

    One random partition and one set of per-partition fits are shared by
    all estimands; each estimand gets its own noise and posterior streams
    and its own budget ``epsilon`` (recorded in ``ledger`` if given).
    """
    estimands = [Estimand.parse(e) for e in estimands]
    budget = validate_parameters(M, a, epsilon, pi, data.n)
    data.require_both_arms()
    posterior = posterior or PosteriorConfig()
    n_partition = data.n // M

    parts = random_partition(data, M, rng=stream(seed, "partition"))
    fits = fit_partitions(data, parts, a, varmodel)

    results = {}
    for est in estimands:
        s_v = sensitivity_v(est, a, n_partition)
        agg = aggregate(
            partition_estimates(fits, est),
            stream(seed, "fallback", est.value) if allow_fallback else None,
            s_v,
        )
        release = privatize(
            agg,
            budget,
            est,
            a,
            n_partition,
            stream(seed, "eta_tau", est.value),
            stream(seed, "eta_v", est.value),
            n=data.n,
            seed=seed,
        )
        if ledger is not None:
            ledger.record_release(data.fingerprint(), release)
        summary = summarize(release, posterior, stream(seed, "posterior", est.value))
        results[est] = DPWateResult(release, summary, agg)
    return results


def nonprivate_wate(data: CausalDataset, estimand, varmodel: OutcomeVarianceModel = FITTED, a=None) -> WateEstimate:
    """Single fit on the full data; untruncated scores unless ``a`` is given."""
    model = fit_propensity(data)
    scores = predict_scores(model, data, a)
    return estimate_pair(data, scores, estimand, varmodel)
