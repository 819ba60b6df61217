"""Gaussian-process surrogate with an RBF kernel and Expected Improvement.

Hyperparameters are (lengthscale, output_scale, noise variance), fitted by
maximising the log marginal likelihood plus lognormal log-priors on the
lengthscale and output scale. All linear algebra goes through a Cholesky
factor of K + noise * I; a jitter ladder rescues near-singular kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from . import kernels

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG_BOUNDS = (
    (math.log(1e-3), math.log(1e3)),    # lengthscale
    (math.log(1e-6), math.log(1e4)),    # output scale
    (math.log(1e-8), math.log(1e2)),    # noise variance
)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class GPFitError(LinAlgError):
    """The kernel matrix stayed indefinite after the whole jitter ladder."""


@dataclass(frozen=True)
class LogNormalPrior:
    """Lognormal prior: log(value) ~ N(mean, std^2). ``mean`` is in log units."""

    mean: float
    std: float

    def logpdf_log(self, log_value):
        z = (log_value - self.mean) / self.std
        return -0.5 * z * z - math.log(self.std) - 0.5 * math.log(2 * math.pi)

    def dlogpdf_log(self, log_value):
        return -(log_value - self.mean) / self.std ** 2

    def sample_log(self, rng):
        return rng.normal(self.mean, self.std)


@dataclass
class GPModel:
    """Training data, hyperparameters and (once conditioned) the Cholesky factor.

    With ``normalize_y`` the outputs are shifted and scaled to zero mean and
    unit variance before conditioning, and predictions are mapped back.
    """

    inputs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    outputs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lengthscale: float = 0.3
    output_scale: float = 1.0
    noise: float = 1e-4
    lengthscale_prior: LogNormalPrior | None = field(
        default_factory=lambda: LogNormalPrior(math.log(0.3), 0.5))
    output_scale_prior: LogNormalPrior | None = None
    normalize_y: bool = True
    jitter: float = 0.0
    y_offset: float = 0.0
    y_scale: float = 1.0
    chol: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    log_likelihood: float | None = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float)).reshape(-1, 2)
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs differ in length")
        if self.lengthscale <= 0 or self.output_scale <= 0 or self.noise < 0:
            raise ValueError("lengthscale and output_scale must be > 0, noise >= 0")

    @property
    def n(self) -> int:
        return len(self.outputs)

    @property
    def fitted(self) -> bool:
        return self.chol is not None or self.n == 0

    def with_data(self, inputs, outputs) -> GPModel:
        return replace(self, inputs=inputs, outputs=outputs, chol=None, weights=None,
                       log_likelihood=None)


def _targets(model: GPModel):
    y = model.outputs
    if not model.normalize_y or model.n == 0:
        return y, 0.0, 1.0
    offset = float(y.mean())
    scale = float(y.std())
    if not scale > 1e-12:
        scale = 1.0
    return (y - offset) / scale, offset, scale


def _factor(kmat: np.ndarray, noise: float):
    n = len(kmat)
    eye = np.eye(n)
    for jitter in JITTER_LADDER:
        try:
            return cholesky(kmat + (noise + jitter) * eye, lower=True), jitter
        except LinAlgError:
            continue
    raise GPFitError("kernel matrix is not positive definite even with jitter 1e-6")


def condition(model: GPModel) -> GPModel:
    """Factorise the kernel at the current hyperparameters (no optimisation)."""
    if model.n == 0:
        return replace(model, chol=None, weights=None, y_offset=0.0, y_scale=1.0)
    y, offset, scale = _targets(model)
    kmat = kernels.rbf_cross(model.inputs, model.inputs, model.lengthscale, model.output_scale)
    chol, jitter = _factor(kmat, model.noise)
    weights = cho_solve((chol, True), y)
    ll = -0.5 * y @ weights - np.log(np.diag(chol)).sum() - 0.5 * model.n * math.log(2 * math.pi)
    return replace(model, chol=chol, weights=weights, jitter=jitter, y_offset=offset,
                   y_scale=scale, log_likelihood=float(ll))


def log_posterior(model: GPModel, log_params, y=None, sqdist=None, with_grad: bool = True):
    """Log marginal likelihood plus log-priors at log-hyperparameters, and its gradient.

    ``log_params`` = (log lengthscale, log output_scale, log noise variance).
    """
    log_ell, log_s, log_noise = log_params
    ell, s, noise = math.exp(log_ell), math.exp(log_s), math.exp(log_noise)
    if y is None:
        y = _targets(model)[0]
    if sqdist is None:
        sqdist = _sqdist(model.inputs)
    n = len(y)
    base = np.exp(-sqdist / (2 * ell * ell))
    kmat = s * base
    chol, _ = _factor(kmat, noise)
    weights = cho_solve((chol, True), y)
    value = -0.5 * y @ weights - np.log(np.diag(chol)).sum() - 0.5 * n * math.log(2 * math.pi)
    grad = np.zeros(3)
    if with_grad:
        kinv = cho_solve((chol, True), np.eye(n))
        inner = np.outer(weights, weights) - kinv
        grad[0] = 0.5 * np.sum(inner * (kmat * sqdist / (ell * ell)))
        grad[1] = 0.5 * np.sum(inner * kmat)
        grad[2] = 0.5 * noise * np.trace(inner)
    if model.lengthscale_prior is not None:
        value += model.lengthscale_prior.logpdf_log(log_ell)
        grad[0] += model.lengthscale_prior.dlogpdf_log(log_ell)
    if model.output_scale_prior is not None:
        value += model.output_scale_prior.logpdf_log(log_s)
        grad[1] += model.output_scale_prior.dlogpdf_log(log_s)
    return float(value), grad


def _sqdist(x):
    sq = (x * x).sum(1)
    d = sq[:, None] + sq[None, :] - 2 * x @ x.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _start_points(model: GPModel, n_starts: int, rng):
    starts = [np.log([model.lengthscale, model.output_scale, max(model.noise, 1e-8)])]
    lo = np.array([b[0] for b in LOG_BOUNDS])
    hi = np.array([b[1] for b in LOG_BOUNDS])
    for _ in range(n_starts - 1):
        point = rng.uniform(lo, hi)
        if model.lengthscale_prior is not None:
            point[0] = model.lengthscale_prior.sample_log(rng)
        if model.output_scale_prior is not None:
            point[1] = model.output_scale_prior.sample_log(rng)
        else:
            point[1] = rng.normal(0.0, 1.0)
        point[2] = rng.uniform(math.log(1e-6), math.log(1e-1))
        starts.append(np.clip(point, lo, hi))
    return starts


def gp_fit(model: GPModel, n_starts: int = 16, rng=None, maxiter: int = 200) -> GPModel:
    """MAP hyperparameters by multi-start L-BFGS-B over log-parameters.

    The first start is the model's current hyperparameters; the rest are drawn
    from the priors (log-uniform within bounds where no prior is set).
    Optimiser tolerances: ftol 1e-10, gtol 1e-6, at most ``maxiter`` iterations.
    """
    if model.n < 2:
        raise ValueError("need at least two observations to fit hyperparameters")
    rng = np.random.default_rng(rng)
    y, _, _ = _targets(model)
    sqdist = _sqdist(model.inputs)

    def objective(theta):
        try:
            value, grad = log_posterior(model, theta, y, sqdist)
        except GPFitError:
            return 1e25, np.zeros(3)
        return -value, -grad

    best = None
    for start in _start_points(model, n_starts, rng):
        res = minimize(objective, start, jac=True, method="L-BFGS-B", bounds=LOG_BOUNDS,
                       options={"maxiter": maxiter, "ftol": 1e-10, "gtol": 1e-6})
        if best is None or res.fun < best.fun:
            best = res
    if best.fun >= 1e25:
        raise GPFitError("no start produced a positive-definite kernel")
    ell, s, noise = np.exp(best.x)
    return condition(replace(model, lengthscale=float(ell), output_scale=float(s),
                             noise=float(noise)))


def gp_predict(model: GPModel, x_star):
    """Posterior mean and latent variance at one point or an (m, 2) batch."""
    x = np.asarray(x_star, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x).reshape(-1, 2)
    if model.n == 0:
        mu = np.zeros(len(x))
        var = np.full(len(x), model.output_scale)
    else:
        if model.chol is None:
            raise RuntimeError("model has data but is not conditioned; call gp_fit or condition")
        k_star = kernels.rbf_cross(x, model.inputs, model.lengthscale, model.output_scale)
        mu = k_star @ model.weights
        v = solve_triangular(model.chol, k_star.T, lower=True, check_finite=False)
        var = model.output_scale - np.einsum("ij,ij->j", v, v)
        mu = model.y_offset + model.y_scale * mu
        var = model.y_scale ** 2 * var
    var = np.maximum(var, 0.0)
    if single:
        return float(mu[0]), float(var[0])
    return mu, var


def ei_from_moments(mu, sigma, best):
    """Expected improvement below ``best`` for a minimisation problem."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    improvement = best - mu
    out = np.maximum(improvement, 0.0)
    pos = sigma > 0
    if np.any(pos):
        # tiny sigma overflows z to +-inf, which ndtr and exp handle correctly
        with np.errstate(over="ignore", divide="ignore"):
            z = np.where(pos, improvement / np.where(pos, sigma, 1.0), 0.0)
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        ei = improvement * ndtr(z) + sigma * pdf
        out = np.where(pos, np.maximum(ei, 0.0), out)
    return out


def expected_improvement(model: GPModel, x_star, best: float):
    mu, var = gp_predict(model, x_star)
    ei = ei_from_moments(mu, np.sqrt(var), best)
    return float(ei) if np.ndim(ei) == 0 else ei
