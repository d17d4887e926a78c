import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpwate._rng import stream
from dpwate.exceptions import AggregationError, ParameterError
from dpwate.privacy import (
    PartitionEstimates,
    PrivacyBudget,
    PrivacyLedger,
    aggregate,
    laplace_inverse_cdf,
    laplace_sample,
    noise_scales,
    privatize,
    sensitivity_tau,
    sensitivity_v,
)
from dpwate.wate import Estimand, WateEstimate


def est(tau, v=0.01):
    return WateEstimate(tau, v, 100, Estimand.ATE, 0.05)


@pytest.mark.parametrize("M,expected", [(1, 2.0), (100, 0.02), (50, 0.04)])
def test_sensitivity_tau(M, expected):
    assert sensitivity_tau(M) == pytest.approx(expected, rel=1e-15)


def test_sensitivity_v_values():
    assert sensitivity_v("ATE", 0.05, 10000) == pytest.approx(0.002, rel=1e-14)
    assert sensitivity_v("ATT", 0.05, 10000) == pytest.approx(0.02, rel=1e-14)
    assert sensitivity_v("ATC", 0.05, 10000) == sensitivity_v("ATT", 0.05, 10000)


@pytest.mark.parametrize("kwargs", [dict(epsilon=0), dict(epsilon=-1), dict(epsilon=1, pi=0), dict(epsilon=1, pi=1)])
def test_budget_validation(kwargs):
    with pytest.raises(ParameterError):
        PrivacyBudget(**kwargs)


@settings(max_examples=200)
@given(st.floats(1e-3, 1e3), st.floats(0.01, 0.99))
def test_budget_split_sums(eps, pi):
    b = PrivacyBudget(eps, pi)
    assert b.epsilon_tau + b.epsilon_v == pytest.approx(eps, rel=1e-15)


def test_aggregate_means():
    agg = aggregate([est(0.1), est(0.2), est(0.3)])
    assert agg.tau_bar == pytest.approx(0.2, abs=1e-15)
    assert agg.v_bar == pytest.approx(0.01, abs=1e-15)
    assert agg.fallback_indices == ()


@settings(max_examples=100)
@given(st.floats(-1, 1), st.floats(0, 1), st.integers(1, 200))
def test_aggregate_of_copies(tau, v, M):
    agg = aggregate([est(tau, v)] * M)
    assert agg.tau_bar == pytest.approx(tau, abs=1e-14)
    assert agg.v_bar == pytest.approx(v, abs=1e-14)


def test_fallback_is_seeded_and_bounded():
    first = aggregate([est(0.1), None], stream(4, "fallback"), 0.5)
    second = aggregate([est(0.1), None], stream(4, "fallback"), 0.5)
    assert first.fallback_indices == (1,)
    assert first.tau[1] == second.tau[1] and first.v[1] == second.v[1]
    assert -1 <= first.tau[1] <= 1 and 0 <= first.v[1] <= 0.5


def test_fallback_disabled_is_error():
    with pytest.raises(AggregationError):
        aggregate([est(0.1), None])
    with pytest.raises(AggregationError):
        aggregate([None, None], stream(0), 1.0)
    with pytest.raises(AggregationError):
        aggregate([])


def test_laplace_quantiles():
    assert laplace_inverse_cdf(0.5) == 0.0
    assert laplace_inverse_cdf(0.75, 1.0) == pytest.approx(np.log(2), rel=1e-15)


@settings(max_examples=200)
@given(st.floats(1e-9, 1 - 1e-9), st.floats(1e-3, 1e3))
def test_laplace_noise_symmetry(u, scale):
    assert laplace_inverse_cdf(1 - u, scale) == pytest.approx(-laplace_inverse_cdf(u, scale), rel=1e-6, abs=1e-9)


def test_laplace_variance():
    draws = laplace_sample(2.0, np.random.default_rng(0), 10**6)
    assert np.var(draws) == pytest.approx(8.0, rel=0.02)


def test_laplace_bad_scale():
    with pytest.raises(ParameterError):
        laplace_sample(0.0, np.random.default_rng(0))


def test_noise_scales_example():
    s_tau, s_v = noise_scales(PrivacyBudget(1.0, 0.5), "ATE", 0.05, 100, 100)
    assert s_tau == pytest.approx(0.04, rel=1e-15)
    assert s_v == pytest.approx((1 / (0.05 * 100)) / (100 * 0.5), rel=1e-15)


def test_huge_epsilon_limit():
    agg = aggregate([est(0.25)] * 100)
    rel = privatize(agg, PrivacyBudget(1e6, 0.5), "ATE", 0.05, 100, stream(1, "eta_tau"), stream(1, "eta_v"))
    assert abs(rel.tau_private - 0.25) < 1e-4


def test_release_carries_public_parameters_only():
    agg = aggregate([est(0.25)] * 10)
    rel = privatize(agg, PrivacyBudget(2.0, 0.25), "ATT", 0.1, 50, stream(1, "eta_tau"), n=503, seed=1)
    d = rel.to_dict()
    assert d["epsilon_tau"] + d["epsilon_v"] == pytest.approx(2.0)
    assert {"tau_bar", "v_bar", "tau", "v"}.isdisjoint(d)
    assert d["n"] == 503 and d["M"] == 10 and d["estimand"] == "ATT"
    assert rel.v_upper == pytest.approx(sensitivity_v("ATT", 0.1, 50) / 2)


def test_privatize_deterministic_per_stream():
    agg = aggregate([est(0.3)] * 20)
    r1 = privatize(agg, PrivacyBudget(1.0), "ATE", 0.05, 50, stream(9, "eta_tau"), stream(9, "eta_v"))
    r2 = privatize(agg, PrivacyBudget(1.0), "ATE", 0.05, 50, stream(9, "eta_tau"), stream(10, "eta_v"))
    assert r1.tau_private == r2.tau_private
    assert r1.v_private != r2.v_private


def test_ledger_sequential_composition(tmp_path):
    path = tmp_path / "ledger.json"
    ledger = PrivacyLedger(path)
    ledger.record("d1", 0.5)
    ledger.record("d1", 1.0)
    ledger.record("d2", 2.0)
    assert ledger.total("d1") == 1.5
    reloaded = PrivacyLedger(path)
    assert reloaded.state("d1") == {"dataset": "d1", "releases": 2, "total_epsilon": 1.5}
    assert json.loads(path.read_text())["entries"][2]["dataset"] == "d2"


def test_ledger_is_thread_safe():
    ledger = PrivacyLedger()
    threads = [threading.Thread(target=lambda: [ledger.record("d", 0.1) for _ in range(100)]) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert ledger.state("d")["releases"] == 800


def test_ledger_rejects_nonpositive():
    with pytest.raises(ParameterError):
        PrivacyLedger().record("d", 0.0)


def test_posterior_api_accepts_only_release():
    import inspect

    from dpwate import posterior

    for fn in (posterior.summarize, posterior.posterior_tau_bar, posterior.posterior_v_bar):
        first = next(iter(inspect.signature(fn).parameters.values()))
        assert first.annotation in ("PrivateRelease", posterior.PrivateRelease)
