import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varsense.fisher import (
    QuadratureDerivatives,
    analytic_fisher,
    analytic_gradient_inputs,
    analytic_moments,
    cost,
    cost_from_fisher,
    cost_gradient,
    fisher_from_moments,
    is_sentinel,
    landscape_minimum,
    optimal_measurement_angle,
    shot_noise_limit_cost,
    variance_ratio,
)
from varsense.gaussian import photon_number, probe_state

R, ALPHA, ETA = 1.52, 5.2, 0.72


def moments_from_state(phi, phi_alpha, r, alpha, eta):
    """Homodyne moments and their basis-angle derivatives straight from the state."""
    state = probe_state(r, alpha, phi_alpha, eta)
    u = np.array([math.cos(phi), math.sin(phi)])
    du = np.array([-math.sin(phi), math.cos(phi)])
    mean, cov = state.mean, state.cov
    return QuadratureDerivatives(u @ mean, u @ cov @ u, du @ mean, 2 * du @ cov @ u)


def test_fisher_matches_closed_form_on_grid():
    worst = 0.0
    for phi in np.linspace(-math.pi, math.pi, 50):
        for pa in np.linspace(-math.pi, math.pi, 50):
            q = moments_from_state(phi, pa, R, ALPHA, ETA)
            f = fisher_from_moments(q)
            ref = analytic_fisher(phi, pa, R, ALPHA, ETA)
            worst = max(worst, abs(f - ref) / max(1.0, ref))
    assert worst < 1e-10


def test_analytic_moments_agree_with_state():
    for phi, pa in [(0.1, 1.7), (-2.0, 0.4), (3.0, -3.0)]:
        a = analytic_moments(phi, pa, R, ALPHA, ETA)
        b = moments_from_state(phi, pa, R, ALPHA, ETA)
        assert (a.mu, a.var, a.dmu_dphi, a.dvar_dphi) == pytest.approx(
            (b.mu, b.var, b.dmu_dphi, b.dvar_dphi), abs=1e-10)


@pytest.mark.parametrize("eta,expected", [(1.0, 0.0478), (0.72, 0.142)])
def test_optimal_angle_matches_grid_argmax(eta, expected):
    phi = np.linspace(0, math.pi / 2, 20001)
    f = analytic_fisher(phi, 0.0, R, 0.0, eta)
    step = phi[1] - phi[0]
    assert abs(phi[np.argmax(f)] - optimal_measurement_angle(R, eta)) <= step
    assert optimal_measurement_angle(R, eta) == pytest.approx(expected, abs=5e-4)


def test_displaced_probe_optimum_is_at_quadrature_angle():
    c, phi, pa = landscape_minimum(R, ALPHA, ETA)
    assert abs(math.remainder(phi, math.pi)) < 1e-3
    assert abs(math.remainder(pa - phi, math.pi)) == pytest.approx(math.pi / 2, abs=1e-3)
    assert c == pytest.approx(1 / analytic_fisher(0.0, math.pi / 2, R, ALPHA, ETA), rel=1e-9)


def test_below_shot_noise_limit():
    n = photon_number(probe_state(R, ALPHA, 0.0))
    c, phi, pa = landscape_minimum(R, ALPHA, ETA)
    assert analytic_fisher(phi, pa, R, ALPHA, ETA) > 4 * n
    assert c < shot_noise_limit_cost(n)


def test_minimum_cost_decreases_with_efficiency():
    costs = [landscape_minimum(R, ALPHA, eta, n_grid=401)[0] for eta in np.linspace(0.3, 1.0, 8)]
    assert all(b < a for a, b in zip(costs, costs[1:]))


@settings(max_examples=60, deadline=None)
@given(phi=st.floats(-3, 3), pa=st.floats(-3, 3))
def test_cost_gradient_matches_finite_differences(phi, pa):
    f0 = analytic_fisher(phi, pa, R, ALPHA, ETA)
    if f0 < 1.0:  # stay away from the Fisher zeros where 1/F blows up
        return
    h = 1e-6
    c = lambda a, b: 1 / analytic_fisher(a, b, R, ALPHA, ETA)  # noqa: E731
    fd = [(c(phi + h, pa) - c(phi - h, pa)) / (2 * h), (c(phi, pa + h) - c(phi, pa - h)) / (2 * h)]
    got = cost_gradient(analytic_gradient_inputs(phi, pa, R, ALPHA, ETA))
    assert got == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_zero_fisher_gives_sentinel():
    q = QuadratureDerivatives(mu=1.0, var=1.0, dmu_dphi=0.0, dvar_dphi=0.0)
    assert is_sentinel(cost(q))
    assert cost_from_fisher(4.0, n_samples=10) == pytest.approx(1 / 40)
    with pytest.raises(ValueError):
        cost_gradient(analytic_gradient_inputs(0.0, 0.0, 0.0, 0.0, 1.0))


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_non_positive_variance_rejected(bad):
    with pytest.raises(ValueError):
        fisher_from_moments(QuadratureDerivatives(0.0, bad, 1.0, 1.0))


def test_variance_ratio_and_limits():
    assert variance_ratio(0.0, 0.5) == pytest.approx(1.0)
    assert optimal_measurement_angle(0.0) == pytest.approx(math.pi / 4)
    assert shot_noise_limit_cost(31.78) == pytest.approx(1 / (4 * 31.78))
    with pytest.raises(ValueError):
        shot_noise_limit_cost(0.0)
