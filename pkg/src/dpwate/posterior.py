"""Bayesian post-processing of a private release into interval estimates.

Under a uniform prior and a Laplace likelihood, the posterior of each
averaged statistic is a Laplace density centred at the noisy value and
truncated to the prior support. It is sampled exactly by inverting its CDF;
a slice sampler on the same density is available for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ParameterError
from .privacy import PrivateRelease

SAMPLERS = ("exact", "mcmc")


def _open_interval(u):
    # inverse-CDF inputs must avoid the endpoints 0 and 1
    return np.clip(u, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def _inside(x, lo, hi):
    return np.clip(x, np.nextafter(lo, hi), np.nextafter(hi, lo))


def truncated_laplace_ppf(u, center: float, scale: float, lo: float, hi: float):
    """Quantile function of Laplace(center, scale) restricted to (lo, hi).

    Evaluated piecewise with ``log1p``/``expm1`` so that centres far outside
    the support and very small scales stay accurate.
    """
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale!r}")
    if not lo < hi:
        raise ParameterError("support must satisfy lo < hi")
    u = _open_interval(np.asarray(u, dtype=float))
    b = scale
    with np.errstate(divide="ignore"):
        # log1p(-1) = -inf only for tail quantiles beyond the support; clipped below
        x = _ppf_pieces(u, center, b, lo, hi)
    return _inside(x, lo, hi)


def _ppf_pieces(u, center, b, lo, hi):
    if center <= lo:
        # density decays away from lo
        x = lo - b * np.log1p(u * np.expm1(-(hi - lo) / b))
    elif center >= hi:
        x = hi + b * np.log1p((1.0 - u) * np.expm1(-(hi - lo) / b))
    else:
        # mass left of the centre and right of it, in units of b
        left = -np.expm1(-(center - lo) / b)
        right = -np.expm1(-(hi - center) / b)
        s = u * (left + right)
        on_left = s < left
        x = np.empty_like(s)
        x[on_left] = center + b * np.log(s[on_left] + np.exp(-(center - lo) / b))
        x[~on_left] = center - b * np.log1p(-(s[~on_left] - left))
    return x


def sample_truncated_laplace(center, scale, lo, hi, rng: np.random.Generator, size=None):
    u = rng.random(size)
    out = truncated_laplace_ppf(u, center, scale, lo, hi)
    return float(out) if np.ndim(out) == 0 else out


def slice_sample_truncated_laplace(
    center, scale, lo, hi, rng: np.random.Generator, size: int, burn_in: int = 1000, thin: int = 1
) -> np.ndarray:
    """Univariate slice sampler (stepping out, shrinkage) on the same density."""

    def logp(x):
        return -abs(x - center) / scale

    width = min(2.0 * scale, hi - lo)
    x = float(_inside(np.clip(center, lo, hi), lo, hi))
    lp = logp(x)
    out = np.empty(size)
    total = burn_in + size * thin
    kept = 0
    for it in range(total):
        level = lp + np.log(rng.random())
        left = x - width * rng.random()
        right = left + width
        while left > lo and logp(left) > level:
            left -= width
        while right < hi and logp(right) > level:
            right += width
        left, right = max(left, lo), min(right, hi)
        while True:
            cand = left + (right - left) * rng.random()
            if lo < cand < hi and logp(cand) > level:
                x, lp = cand, logp(cand)
                break
            if cand < x:
                left = cand
            else:
                right = cand
        if it >= burn_in and (it - burn_in) % thin == 0:
            out[kept] = x
            kept += 1
    return out


def _draw(center, scale, lo, hi, rng, size, config):
    if config.sampler_mode == "exact":
        return sample_truncated_laplace(center, scale, lo, hi, rng, size)
    return slice_sample_truncated_laplace(center, scale, lo, hi, rng, size, config.burn_in, config.thin)


@dataclass(frozen=True)
class PosteriorConfig:
    L: int = 10000
    burn_in: int = 1000
    sampler_mode: str = "exact"
    thin: int = 1

    def __post_init__(self):
        if self.sampler_mode not in SAMPLERS:
            raise ParameterError(f"sampler_mode must be one of {SAMPLERS}, got {self.sampler_mode!r}")
        if self.L < 1 or self.burn_in < 0 or self.thin < 1:
            raise ParameterError("L and thin must be >= 1 and burn_in >= 0")


def posterior_tau_bar(release: PrivateRelease, rng, size=None, config: Optional[PosteriorConfig] = None):
    """Draws of the averaged effect given the release (prior U(-1, 1))."""
    config = config or PosteriorConfig()
    n = 1 if size is None else size
    out = _draw(release.tau_private, release.scale_tau, -1.0, 1.0, rng, n, config)
    return float(out[0]) if size is None else out


def posterior_v_bar(release: PrivateRelease, rng, size=None, config: Optional[PosteriorConfig] = None):
    """Draws of the averaged variance given the release (prior U(0, S_V/2))."""
    config = config or PosteriorConfig()
    n = 1 if size is None else size
    out = _draw(release.v_private, release.scale_v, 0.0, release.v_upper, rng, n, config)
    return float(out[0]) if size is None else out


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    draws: np.ndarray
    tau_bar_draws: np.ndarray
    v_bar_draws: np.ndarray
    point: float
    lower: float
    upper: float
    sampler_mode: str = "exact"

    @property
    def L(self) -> int:
        return len(self.draws)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return bool(self.lower <= value <= self.upper)

    def to_dict(self, include_draws: bool = False) -> dict:
        d = {
            "point": self.point,
            "lower": self.lower,
            "upper": self.upper,
            "L": self.L,
            "sampler_mode": self.sampler_mode,
        }
        if include_draws:
            d["draws"] = [float(x) for x in self.draws]
        return d


def summarize(release: PrivateRelease, config: Optional[PosteriorConfig] = None, rng=None) -> PosteriorSummary:
    """Posterior draws of the effect, their mean and the equal-tailed 95% interval."""
    config = config or PosteriorConfig()
    if rng is None:
        rng = np.random.default_rng()
    r_tau, r_v, r_norm = rng.spawn(3)
    tau_bar = posterior_tau_bar(release, r_tau, config.L, config)
    v_bar = posterior_v_bar(release, r_v, config.L, config)
    draws = r_norm.normal(tau_bar, np.sqrt(v_bar))
    lower, upper = np.quantile(draws, [0.025, 0.975])
    return PosteriorSummary(
        draws=draws,
        tau_bar_draws=tau_bar,
        v_bar_draws=v_bar,
        point=float(np.mean(draws)),
        lower=float(lower),
        upper=float(upper),
        sampler_mode=config.sampler_mode,
    )
