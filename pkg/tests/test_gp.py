import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from varsense.gp import (
    GPFitError,
    GPModel,
    _factor,
    condition,
    ei_from_moments,
    expected_improvement,
    gp_fit,
    gp_predict,
    log_posterior,
)


def dense_posterior(x, y, xs, ell, s, noise):
    """Textbook posterior with an explicit inverse, kept independent of the package."""
    def k(a, b):
        d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return s * np.exp(-d / (2 * ell ** 2))

    kinv = np.linalg.inv(k(x, x) + noise * np.eye(len(x)))
    ks = k(xs, x)
    mu = ks @ kinv @ y
    var = s - np.einsum("ij,jk,ik->i", ks, kinv, ks)
    return mu, var


@pytest.mark.parametrize("n", [1, 7, 60, 200])
@pytest.mark.parametrize("normalize", [False, True])
def test_posterior_matches_dense_oracle(n, normalize, rng):
    for trial in range(3):
        x = rng.uniform(-math.pi, math.pi, (n, 2))
        y = rng.normal(size=n) * 3 + 1
        ell, s, noise = rng.uniform(0.3, 1.5), rng.uniform(0.5, 2.0), rng.uniform(1e-3, 1e-1)
        model = condition(GPModel(x, y, ell, s, noise, normalize_y=normalize))
        xs = rng.uniform(-4, 4, (50, 2))
        mu, var = gp_predict(model, xs)
        if normalize:
            off, sc = y.mean(), (y.std() if y.std() > 1e-12 else 1.0)
            m_ref, v_ref = dense_posterior(x, (y - off) / sc, xs, ell, s, noise)
            m_ref, v_ref = off + sc * m_ref, sc ** 2 * v_ref
        else:
            m_ref, v_ref = dense_posterior(x, y, xs, ell, s, noise)
        assert np.abs(mu - m_ref).max() < 1e-10
        assert np.abs(var - np.maximum(v_ref, 0)).max() < 1e-10


def test_prior_and_limits():
    empty = GPModel(output_scale=2.5)
    assert gp_predict(empty, [0.1, 0.2]) == (0.0, 2.5)
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    model = condition(GPModel(x, [1.0, -2.0], 0.3, 1.5, 0.0, normalize_y=False))
    mu, var = gp_predict(model, [1.0, 1.0])
    assert mu == pytest.approx(-2.0) and var < 1e-10
    mu, var = gp_predict(model, [50.0, 50.0])
    assert mu == pytest.approx(0.0, abs=1e-12) and var == pytest.approx(1.5)


def test_unconditioned_model_raises():
    with pytest.raises(RuntimeError):
        gp_predict(GPModel([[0, 0], [1, 1]], [1, 2]), [0, 0])


def test_log_posterior_gradient_matches_numeric(rng):
    x = rng.uniform(-2, 2, (30, 2))
    y = np.sin(x[:, 0]) + 0.1 * rng.normal(size=30)
    model = GPModel(x, y, output_scale_prior=None)
    theta = np.log([0.6, 1.3, 0.02])
    _, grad = log_posterior(model, theta)
    h = 1e-6
    num = [(log_posterior(model, theta + h * e, with_grad=False)[0]
            - log_posterior(model, theta - h * e, with_grad=False)[0]) / (2 * h) for e in np.eye(3)]
    assert grad == pytest.approx(num, rel=1e-5, abs=1e-6)


def test_fit_recovers_lengthscale(rng):
    n, ell, s, noise = 100, 0.5, 2.0, 0.01
    x = rng.uniform(-2, 2, (n, 2))
    d = ((x[:, None] - x[None]) ** 2).sum(-1)
    cov = s * np.exp(-d / (2 * ell ** 2)) + noise * np.eye(n)
    y = np.linalg.cholesky(cov) @ rng.normal(size=n)
    fit = gp_fit(GPModel(x, y, lengthscale_prior=None, normalize_y=False), rng=1)
    assert fit.lengthscale == pytest.approx(ell, rel=0.25)


def test_contradictory_duplicates_need_noise():
    fit = gp_fit(GPModel([[0.5, 0.5], [0.5, 0.5]], [0.0, 1.0]), rng=0)
    assert fit.noise > 0.1


def test_constant_outputs_predict_constant():
    x = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    fit = gp_fit(GPModel(x, np.full(10, 3.0)), rng=0)
    mu, _ = gp_predict(fit, np.array([[0.0, 0.0], [5.0, -5.0]]))
    assert mu == pytest.approx([3.0, 3.0])


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        gp_fit(GPModel([[0, 0]], [1.0]))


def test_jitter_ladder_rescues_duplicates_and_gives_up_on_indefinite():
    k = np.ones((3, 3))
    chol, jitter = _factor(k, 0.0)
    assert jitter > 0
    with pytest.raises(GPFitError):
        _factor(-np.eye(3), 0.0)


@pytest.mark.parametrize("mu,sigma,best,expected", [
    (1.0, 0.0, 1.0, 0.0),
    (2.0, 0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0, 1.0),
    (1.0, 1.0, 1.0, norm.pdf(0.0)),
])
def test_ei_examples(mu, sigma, best, expected):
    assert float(ei_from_moments(mu, sigma, best)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(-5, 5), best=st.floats(-5, 5), s1=st.floats(0, 5), s2=st.floats(0, 5))
def test_ei_nonnegative_and_grows_with_sigma(mu, best, s1, s2):
    lo, hi = sorted((s1, s2))
    a, b = float(ei_from_moments(mu, lo, best)), float(ei_from_moments(mu, hi, best))
    assert a >= 0 and b >= 0
    assert b >= a - 1e-12
    z = (best - mu) / hi if hi > 1e-100 else None
    if z is not None:
        assert b == pytest.approx((best - mu) * norm.cdf(z) + hi * norm.pdf(z), abs=1e-9)


def test_expected_improvement_prefers_low_mean(rng):
    x = np.array([[-1.0, 0.0], [1.0, 0.0]])
    model = condition(GPModel(x, [0.0, 5.0], 0.5, 1.0, 1e-6, normalize_y=False))
    ei = expected_improvement(model, np.array([[-0.9, 0.0], [0.9, 0.0]]), best=0.0)
    assert ei[0] > ei[1]
