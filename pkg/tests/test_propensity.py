import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.special import expit

from dpwate.dataset import CausalDataset
from dpwate.exceptions import FitError, ParameterError
from dpwate.propensity import (
    fit_logistic,
    fit_propensity,
    predict_scores,
    scores_from_values,
    truncate,
)
from dpwate.simlab import assign_treatment, generate_covariates


def neg_loglik(beta, X, t):
    eta = X @ beta
    return float(np.sum(np.logaddexp(0.0, eta) - t * eta))


def test_matches_generic_optimizer():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(400, 3))
    t = rng.random(400) < expit(0.3 + x @ np.array([0.5, -1.0, 0.2]))
    model = fit_logistic(x, t)
    X = np.column_stack([np.ones(400), x])
    ref = minimize(neg_loglik, np.zeros(4), args=(X, t), method="BFGS", options={"gtol": 1e-10})
    np.testing.assert_allclose(model.coefficients, ref.x, atol=1e-5)
    assert model.converged
    assert model.final_gradient_norm <= 1e-8


def test_one_covariate_grid_oracle():
    # coarse-to-fine grid search on the log-likelihood as an independent oracle
    rng = np.random.default_rng(9)
    x = rng.normal(size=150)
    t = (rng.random(150) < expit(-0.4 + 0.8 * x)).astype(float)
    X = np.column_stack([np.ones(150), x])
    center, width = np.zeros(2), 4.0
    for _ in range(12):
        grid = np.linspace(-width, width, 41)
        b0, b1 = np.meshgrid(center[0] + grid, center[1] + grid, indexing="ij")
        vals = np.array([[neg_loglik(np.array([p, q]), X, t) for q in row_q] for p, row_q in zip(b0[:, 0], b1)])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        center = np.array([b0[i, j], b1[i, j]])
        width /= 4
    model = fit_logistic(x, t)
    np.testing.assert_allclose(model.coefficients, center, atol=1e-4)


def test_independent_treatment_slopes_near_zero():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5000, 4))
    z = rng.random(5000) < 0.5
    coef = fit_logistic(x, z).coefficients
    assert np.all(np.abs(coef[1:]) < 0.1)


def test_recovers_simulation_coefficients():
    rng = np.random.default_rng(2)
    x = generate_covariates(10000, 0.2, rng)
    z, _ = assign_treatment(x, 2.0, rng)
    model = fit_logistic(x, z)
    X = np.column_stack([np.ones(len(x)), x])
    p = model.predict(x)
    se = np.sqrt(np.diag(np.linalg.inv(X.T @ (X * (p * (1 - p))[:, None]))))
    truth = np.array([0.1, 0.4, 1.0, -0.5, -0.9])
    assert np.all(np.abs(model.coefficients - truth) < 3 * se)


def test_perfect_separation_is_fit_error():
    with pytest.raises(FitError, match="separation"):
        fit_logistic(np.array([-2.0, -1.0, 1.0, 2.0]), np.array([0, 0, 1, 1]))


def test_rank_deficient_design():
    x = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(FitError, match="rank"):
        fit_logistic(x, np.arange(10) % 2)


def test_constant_target():
    with pytest.raises(FitError):
        fit_logistic(np.arange(10.0), np.ones(10))


def test_iteration_cap_reports_not_converged():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 2))
    t = rng.random(200) < expit(x[:, 0])
    model = fit_logistic(x, t, max_iter=1)
    assert not model.converged
    assert model.iterations == 1


@pytest.mark.parametrize("raw,expected", [(0.02, 0.05), (0.50, 0.50), (0.97, 0.95)])
def test_truncation_examples(raw, expected):
    assert truncate([raw], 0.05)[0] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("a", [0.0, 0.5, -0.1, 0.7])
def test_bad_truncation_level(a):
    with pytest.raises(ParameterError):
        truncate([0.5], a)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=50),
    st.floats(1e-4, 0.4999),
)
def test_truncation_bounds_and_idempotence(raw, a):
    out = truncate(raw, a)
    assert np.all(out >= a) and np.all(out <= 1 - a)
    np.testing.assert_array_equal(truncate(out, a), out)
    inside = (np.array(raw) >= a) & (np.array(raw) <= 1 - a)
    np.testing.assert_array_equal(out[inside], np.array(raw)[inside])


def test_predict_scores_keeps_raw(sim_data):
    model = fit_propensity(sim_data)
    s = predict_scores(model, sim_data, 0.1)
    assert s.a == 0.1
    np.testing.assert_array_equal(s.truncated, np.clip(s.raw, 0.1, 0.9))
    untrunc = predict_scores(model, sim_data, None)
    np.testing.assert_array_equal(untrunc.raw, untrunc.truncated)


def test_scores_from_values_rejects_boundary():
    with pytest.raises(ParameterError):
        scores_from_values([0.0, 0.5])
    s = scores_from_values([0.01, 0.5], a=0.05)
    np.testing.assert_array_equal(s.truncated, [0.05, 0.5])


def test_fit_propensity_uses_all_covariates(sim_data):
    assert fit_propensity(sim_data).coefficients.shape == (sim_data.p + 1,)


def test_single_column_dataset():
    d = CausalDataset([0, 1, 0, 1, 1, 0], [0, 0, 1, 1, 0, 1], [[0.1], [0.5], [0.2], [0.9], [0.4], [0.3]])
    assert fit_propensity(d).converged
