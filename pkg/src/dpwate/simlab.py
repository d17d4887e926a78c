"""Simulation studies: synthetic data, ground truth, replications, summaries."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from ._rng import stream
from ._serialize import dumps
from .dataset import CausalDataset
from .exceptions import DPWateError, ParameterError, ValidationError
from .pipeline import dp_wate, nonprivate_wate
from .posterior import PosteriorConfig
from .wate import ALL_ESTIMANDS, Estimand

BETA = (0.15, -0.2, 0.3, -0.4, 0.6)
TREATMENT_COEF = (0.2, 0.5, -0.25, -0.45)
TREATMENT_INTERCEPT = 0.1


def generate_covariates(n: int, rho: float, rng: np.random.Generator, p: int = 4) -> np.ndarray:
    """Rows i.i.d. N(0, (1 - rho) I + rho J) via a shared scalar factor."""
    if not (0 <= rho < 1):
        raise ParameterError(f"rho must lie in [0, 1), got {rho!r}")
    g = rng.standard_normal((n, 1))
    noise = rng.standard_normal((n, p))
    return math.sqrt(rho) * g + math.sqrt(1.0 - rho) * noise


def treatment_propensity(x: np.ndarray, eta: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[1] != 4:
        raise ParameterError("treatment model expects 4 covariates")
    return expit(TREATMENT_INTERCEPT + eta * (x @ np.asarray(TREATMENT_COEF)))


def assign_treatment(x, eta: float, rng: np.random.Generator):
    """Bernoulli treatment draws; returns ``(z, true_propensity)``."""
    e = treatment_propensity(x, eta)
    z = (rng.random(len(e)) < e).astype(np.int8)
    return z, e


def outcome_probabilities(x, gamma: float, beta=BETA):
    """``(P(y(0)=1 | x), P(y(1)=1 | x))`` under the logistic outcome model."""
    beta = np.asarray(beta, dtype=float)
    lin = beta[0] + np.asarray(x, dtype=float) @ beta[1:]
    return expit(lin), expit(lin + gamma)


def generate_outcomes(x, z, gamma: float, beta=BETA, rng: Optional[np.random.Generator] = None):
    """Potential outcomes and the observed outcome; returns ``(y0, y1, y)``."""
    p0, p1 = outcome_probabilities(x, gamma, beta)
    y0 = (rng.random(len(p0)) < p0).astype(np.int8)
    y1 = (rng.random(len(p1)) < p1).astype(np.int8)
    z = np.asarray(z)
    y = np.where(z == 1, y1, y0).astype(np.int8)
    return y0, y1, y


def true_effects(x, z, gamma: float, beta=BETA) -> dict:
    """Average probability differences over everyone, the treated and the controls."""
    p0, p1 = outcome_probabilities(x, gamma, beta)
    diff = p1 - p0
    z = np.asarray(z).astype(bool)
    if z.all() or not z.any():
        raise ValidationError("ATT/ATC are undefined without both treated and control units")
    return {
        Estimand.ATE: float(diff.mean()),
        Estimand.ATT: float(diff[z].mean()),
        Estimand.ATC: float(diff[~z].mean()),
    }


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 10000
    rho: float = 0.2
    eta: float = 2.0
    gamma: float = 1.0
    beta: tuple = BETA
    replications: int = 100
    seed: int = 0
    M: int = 100
    a: float = 0.05
    epsilon: float = 1.0
    pi: float = 0.5
    L: int = 10000
    sampler: str = "exact"
    estimands: tuple = ("ATE", "ATT", "ATC")
    allow_fallback: bool = True
    n_jobs: int = 1
    histogram_bins: int = 20

    def __post_init__(self):
        if not (0 <= self.rho < 1):
            raise ParameterError(f"rho must lie in [0, 1), got {self.rho!r}")
        if self.n < 100:
            raise ParameterError(f"n must be >= 100, got {self.n!r}")
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "estimands", tuple(Estimand.parse(e).value for e in self.estimands))

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown simulation keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("beta", "estimands"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def simulate_dataset(config: SimulationConfig, seed: int):
    """One synthetic dataset plus its true effects and true propensities."""
    rng = stream(seed, "data")
    x = generate_covariates(config.n, config.rho, rng)
    z, e = assign_treatment(x, config.eta, rng)
    _, _, y = generate_outcomes(x, z, config.gamma, config.beta, rng)
    return CausalDataset(y, z, x), true_effects(x, z, config.gamma, config.beta), e


@dataclass
class ReplicationResult:
    index: int
    true_tau: dict
    nonprivate: dict = field(default_factory=dict)  # estimand -> (tau, v, lower, upper)
    private: dict = field(default_factory=dict)  # estimand -> (point, lower, upper)
    fallback_partitions: int = 0
    propensity_hist: Optional[np.ndarray] = None
    error: Optional[str] = None

    def nonprivate_covers(self, est) -> bool:
        _, _, lo, hi = self.nonprivate[est]
        return lo <= self.true_tau[est] <= hi

    def private_covers(self, est) -> bool:
        _, lo, hi = self.private[est]
        return lo <= self.true_tau[est] <= hi


def run_replication(config: SimulationConfig, index: int) -> ReplicationResult:
    seed = config.seed + index
    data, truth, e_true = simulate_dataset(config, seed)
    res = ReplicationResult(index, truth)
    edges = np.linspace(0.0, 1.0, config.histogram_bins + 1)
    z = data.treatments.astype(bool)
    res.propensity_hist = np.stack(
        [np.histogram(e_true[~z], edges)[0], np.histogram(e_true[z], edges)[0]]
    )
    estimands = [Estimand.parse(e) for e in config.estimands]
    try:
        for est in estimands:
            w = nonprivate_wate(data, est)
            lo, hi = w.confidence_interval()
            res.nonprivate[est] = (w.tau_hat, w.v_hat, lo, hi)
        out = dp_wate(
            data,
            estimands,
            M=config.M,
            a=config.a,
            epsilon=config.epsilon,
            pi=config.pi,
            seed=seed,
            posterior=PosteriorConfig(L=config.L, sampler_mode=config.sampler),
            allow_fallback=config.allow_fallback,
        )
    except DPWateError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    for est, r in out.items():
        res.private[est] = (r.summary.point, r.summary.lower, r.summary.upper)
    res.fallback_partitions = len(next(iter(out.values())).debug.fallback_indices)
    return res


def rmse(estimates, truth) -> float:
    """Root of the average squared error."""
    d = np.asarray(estimates, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


@dataclass
class StudySummary:
    config: SimulationConfig
    rows: list  # one dict per (estimand, pipeline)
    failures: int
    fallback_replications: int
    histogram: dict

    def row(self, estimand, pipeline: str) -> dict:
        estimand = Estimand.parse(estimand).value
        for r in self.rows:
            if r["estimand"] == estimand and r["pipeline"] == pipeline:
                return r
        raise KeyError((estimand, pipeline))

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        return {
            "config": cfg,
            "failures": self.failures,
            "fallback_replications": self.fallback_replications,
            "rows": self.rows,
            "propensity_histogram": self.histogram,
        }


def summarize_replications(config: SimulationConfig, results) -> StudySummary:
    ok = [r for r in results if r.error is None]
    rows = []
    for name in config.estimands:
        est = Estimand.parse(name)
        truth = np.array([r.true_tau[est] for r in ok])
        np_tau = np.array([r.nonprivate[est][0] for r in ok])
        base = {
            "estimand": est.value,
            "replications": len(ok),
            "mean_true_tau": float(truth.mean()) if ok else math.nan,
            "sd_true_tau": float(truth.std(ddof=1)) if len(ok) > 1 else 0.0,
        }
        if not ok:
            rows.append({**base, "pipeline": "non-private"})
            rows.append({**base, "pipeline": "private"})
            continue
        rows.append(
            {
                **base,
                "pipeline": "non-private",
                "rmse": rmse(np_tau, truth),
                "coverage": float(np.mean([r.nonprivate_covers(est) for r in ok])),
                "mean_ci_length": float(np.mean([r.nonprivate[est][3] - r.nonprivate[est][2] for r in ok])),
                "mean_abs_dev_nonprivate": 0.0,
            }
        )
        dp_point = np.array([r.private[est][0] for r in ok])
        rows.append(
            {
                **base,
                "pipeline": "private",
                "rmse": rmse(dp_point, truth),
                "coverage": float(np.mean([r.private_covers(est) for r in ok])),
                "mean_ci_length": float(np.mean([r.private[est][2] - r.private[est][1] for r in ok])),
                "mean_abs_dev_nonprivate": float(np.mean(np.abs(dp_point - np_tau))),
            }
        )
    hist = sum(r.propensity_hist for r in results if r.propensity_hist is not None)
    edges = np.linspace(0.0, 1.0, config.histogram_bins + 1)
    histogram = {
        "bin_edges": [float(b) for b in edges],
        "control": [int(c) for c in hist[0]],
        "treated": [int(c) for c in hist[1]],
    }
    return StudySummary(
        config,
        rows,
        failures=len(results) - len(ok),
        fallback_replications=sum(1 for r in ok if r.fallback_partitions),
        histogram=histogram,
    )


def _run_one(args):
    config, index = args
    return run_replication(config, index)


def run_study(config: SimulationConfig, return_replications: bool = False):
    """Run ``config.replications`` independent replications and summarise them.

    Replication ``r`` uses seed ``config.seed + r``; results are reduced in
    index order, so the summary does not depend on ``n_jobs``.
    """
    jobs = [(config, r) for r in range(config.replications)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.index)
    summary = summarize_replications(config, results)
    return (summary, results) if return_replications else summary


REPORT_COLUMNS = (
    "scenario",
    "estimand",
    "pipeline",
    "replications",
    "mean_true_tau",
    "sd_true_tau",
    "rmse",
    "coverage",
    "mean_ci_length",
    "mean_abs_dev_nonprivate",
)


def write_reports(summaries: dict, out_dir) -> dict:
    """Write ``study.json``, ``study.csv`` and ``overlap_histogram.csv``.

    ``summaries`` maps a scenario label to its :class:`StudySummary`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {k: out_dir / v for k, v in
             (("json", "study.json"), ("csv", "study.csv"), ("histogram", "overlap_histogram.csv"))}
    paths["json"].write_text(
        dumps({label: s.to_dict() for label, s in summaries.items()}) + "\n", encoding="utf-8"
    )
    with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for label, s in summaries.items():
            for row in s.rows:
                w.writerow([_cell(label if c == "scenario" else row.get(c, "")) for c in REPORT_COLUMNS])
    with open(paths["histogram"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "bin_lower", "bin_upper", "control", "treated"])
        for label, s in summaries.items():
            h = s.histogram
            for b in range(len(h["control"])):
                w.writerow([label, _cell(h["bin_edges"][b]), _cell(h["bin_edges"][b + 1]),
                            h["control"][b], h["treated"][b]])
    return paths


def _cell(v):
    return format(v, ".17g") if isinstance(v, float) else v


def expand_sweep(base: SimulationConfig, sweep: Optional[dict]) -> dict:
    """Scenario configs for a one-parameter-at-a-time sweep, keyed by label."""
    if not sweep:
        return {"baseline": base}
    out = {}
    for key, values in sweep.items():
        if key not in SimulationConfig.__dataclass_fields__:
            raise ParameterError(f"cannot sweep unknown parameter {key!r}")
        for v in values:
            out[f"{key}={v}"] = replace(base, **{key: v})
    return out
