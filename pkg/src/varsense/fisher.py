"""Classical Fisher information of Gaussian homodyne statistics and the cost built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_FISHER = 1e-12


@dataclass(frozen=True)
class QuadratureDerivatives:
    """Homodyne mean/variance and their derivatives with respect to the encoded phase."""

    mu: float
    var: float
    dmu_dphi: float
    dvar_dphi: float


@dataclass(frozen=True)
class FisherGradientInputs:
    """Moments plus, for each control parameter, the derivatives entering grad F.

    The three per-parameter arrays share one ordering, e.g. (phi_HD, phi_alpha).
    """

    q: QuadratureDerivatives
    dvar_dtheta: np.ndarray
    d2mu_dphidtheta: np.ndarray
    d2var_dphidtheta: np.ndarray


def _check_var(var):
    if not var > 0:
        raise ValueError(f"variance must be positive, got {var}")


def fisher_from_moments(q: QuadratureDerivatives) -> float:
    _check_var(q.var)
    return q.dmu_dphi ** 2 / q.var + q.dvar_dphi ** 2 / (2 * q.var ** 2)


def cost_from_fisher(fisher: float, n_samples: int = 1) -> float:
    """1 / (n F); returns ``math.inf`` when the Fisher information vanishes."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if fisher < ZERO_FISHER:
        return math.inf
    return 1.0 / (n_samples * fisher)


def cost(q: QuadratureDerivatives, n_samples: int = 1) -> float:
    return cost_from_fisher(fisher_from_moments(q), n_samples)


def is_sentinel(value: float) -> bool:
    return math.isinf(value)


def fisher_gradient(inp: FisherGradientInputs) -> np.ndarray:
    q = inp.q
    _check_var(q.var)
    v, dmu, dv = q.var, q.dmu_dphi, q.dvar_dphi
    grad_v = np.asarray(inp.dvar_dtheta, dtype=float)
    grad_dmu = np.asarray(inp.d2mu_dphidtheta, dtype=float)
    grad_dv = np.asarray(inp.d2var_dphidtheta, dtype=float)
    mean_term = 2 * v ** 2 * dmu * grad_dmu - v * dmu ** 2 * grad_v
    var_term = v * dv * grad_dv - dv ** 2 * grad_v
    return (mean_term + var_term) / v ** 3


def cost_gradient(inp: FisherGradientInputs, n_samples: int = 1) -> np.ndarray:
    fisher = fisher_from_moments(inp.q)
    if fisher < ZERO_FISHER:
        raise ValueError("cost gradient undefined where the Fisher information vanishes")
    return -fisher_gradient(inp) / (n_samples * fisher ** 2)


def lossy_variance(phi, r, eta):
    return eta * (np.exp(-2 * r) * np.cos(phi) ** 2 + np.exp(2 * r) * np.sin(phi) ** 2) + 1 - eta


def analytic_fisher(phi, phi_alpha, r, alpha, eta):
    """Closed-form Fisher information of the lossy displaced squeezed probe.

    Vectorised over ``phi`` and ``phi_alpha``; phase noise is ignored.
    """
    v = lossy_variance(phi, r, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_part = 4 * eta * alpha ** 2 * np.sin(phi_alpha - phi) ** 2 / v
        var_part = 2 * eta ** 2 * np.sinh(2 * r) ** 2 * np.sin(2 * phi) ** 2 / v ** 2
    return mean_part + var_part


def analytic_moments(phi, phi_alpha, r, alpha, eta) -> QuadratureDerivatives:
    """Moments of the model, differentiated with respect to the measurement angle."""
    amp = 2 * np.sqrt(eta) * alpha
    return QuadratureDerivatives(
        mu=float(amp * np.cos(phi_alpha - phi)),
        var=float(lossy_variance(phi, r, eta)),
        dmu_dphi=float(amp * np.sin(phi_alpha - phi)),
        dvar_dphi=float(2 * eta * np.sinh(2 * r) * np.sin(2 * phi)),
    )


def analytic_gradient_inputs(phi, phi_alpha, r, alpha, eta) -> FisherGradientInputs:
    """Exact gradient ingredients for the controls (phi_HD, phi_alpha), with phi = phi_HD."""
    q = analytic_moments(phi, phi_alpha, r, alpha, eta)
    amp = 2 * np.sqrt(eta) * alpha
    c = amp * np.cos(phi_alpha - phi)
    return FisherGradientInputs(
        q=q,
        dvar_dtheta=np.array([q.dvar_dphi, 0.0]),
        d2mu_dphidtheta=np.array([-c, c]),
        d2var_dphidtheta=np.array([4 * eta * np.sinh(2 * r) * np.cos(2 * phi), 0.0]),
    )


def variance_ratio(r, eta):
    """Anti-squeezed over squeezed variance after loss."""
    return (eta * np.exp(2 * r) + 1 - eta) / (eta * np.exp(-2 * r) + 1 - eta)


def optimal_measurement_angle(r: float, eta: float = 1.0) -> float:
    """Homodyne angle maximising the variance contribution to the Fisher information.

    For a probe without displacement this is the maximiser of the full
    closed form. With a strong displacement the mean term pulls the optimum
    towards 0; use a grid search on :func:`analytic_fisher` in that regime.
    r = 0 gives the degenerate pi/4.
    """
    if r < 0:
        raise ValueError("squeeze strength must be >= 0")
    if eta >= 1.0:
        return 0.5 * math.acos(math.tanh(2 * r))
    ratio = variance_ratio(r, eta)
    return 0.5 * math.acos((ratio - 1) / (ratio + 1))


OPTIMAL_RELATIVE_ANGLE = math.pi / 2


def optimal_displacement_angle(phi_hd: float) -> float:
    return phi_hd + OPTIMAL_RELATIVE_ANGLE


def shot_noise_limit_cost(n_photons: float, n_samples: int = 1) -> float:
    """Cost reached by a coherent probe with the same mean photon number."""
    if n_photons <= 0:
        raise ValueError("photon number must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    return 1.0 / (n_samples * 4 * n_photons)


def landscape_minimum(r, alpha, eta, n_grid: int = 2001):
    """Grid search for the cost minimum of the closed form.

    Returns ``(cost, phi_hd, phi_alpha)``. The landscape is pi-periodic in
    phi_hd and the best relative angle is pi/2, so the search runs over
    phi_hd in [-pi/2, pi/2] at that relative angle and then refines the
    displacement angle on a second 1-D grid.
    """
    phi = np.linspace(-np.pi / 2, np.pi / 2, n_grid)
    f = analytic_fisher(phi, phi + OPTIMAL_RELATIVE_ANGLE, r, alpha, eta)
    best = int(np.argmax(f))
    phi_best = phi[best]
    pa = np.linspace(-np.pi, np.pi, 2 * n_grid - 1)
    fa = analytic_fisher(phi_best, pa, r, alpha, eta)
    j = int(np.argmax(fa))
    return 1.0 / fa[j], float(phi_best), float(pa[j])
