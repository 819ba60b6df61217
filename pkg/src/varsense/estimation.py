"""Cost and gradient estimates from finite homodyne sample sets.

The cost needs five bases around the working point,

    phi_HD, phi_HD + pi/2, phi_HD - pi/2, phi_HD + pi/4, phi_HD - pi/4,

from which the rotation shift rules give the encoded-phase derivatives
    dmu/dphi = (mu(phi_HD - pi/2) - mu(phi_HD + pi/2)) / 2
    dV/dphi  =  V(phi_HD - pi/4) - V(phi_HD + pi/4).
A phase shift of the state by +delta looks like a basis rotation by -delta,
hence the reversed differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bench import MeasurementRecord
from .fisher import (
    ZERO_FISHER,
    FisherGradientInputs,
    QuadratureDerivatives,
    cost_from_fisher,
    fisher_from_moments,
    fisher_gradient,
)

HALF_PI = math.pi / 2
QUARTER_PI = math.pi / 4
COST_OFFSETS = (0.0, HALF_PI, -HALF_PI, QUARTER_PI, -QUARTER_PI)
PARAMS = ("phi_hd", "phi_alpha")


class EstimationError(RuntimeError):
    """A sampled estimate is unusable, e.g. a non-positive variance."""


@dataclass
class CostEstimate:
    cost: float
    fisher: float
    mu: float
    var: float
    dmu_dphi: float
    dvar_dphi: float
    records: list[MeasurementRecord]
    fisher_zero: bool = False

    @property
    def quadratures(self) -> QuadratureDerivatives:
        return QuadratureDerivatives(self.mu, self.var, self.dmu_dphi, self.dvar_dphi)

    def dataset_cost(self) -> float:
        """Cost of the whole central sample set, 1 / (n F)."""
        return cost_from_fisher(self.fisher, self.records[0].n_samples)


@dataclass
class GradientEstimate:
    dC_dphi_hd: float
    dC_dphi_alpha: float
    fisher_gradient: np.ndarray
    cost: CostEstimate
    records_used: dict
    schedule: dict
    records: list[MeasurementRecord] = field(default_factory=list)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.dC_dphi_hd, self.dC_dphi_alpha])

    @property
    def new_measurements(self) -> int:
        return len(self.records)


def _moments_from(records) -> tuple[float, float, float, float]:
    (mu, var), (mu_p, _), (mu_m, _), (_, v_p), (_, v_m) = (
        (r.sample_mean, r.sample_var) for r in records)
    return mu, var, (mu_m - mu_p) / 2.0, v_m - v_p


def estimate_cost(bench, phi_hd: float, phi_alpha: float, n_samples: int | None = None) -> CostEstimate:
    """Five-measurement single-shot cost estimate 1/F at (phi_hd, phi_alpha)."""
    records = [bench.measure(phi_hd + off, phi_alpha, n_samples) for off in COST_OFFSETS]
    mu, var, dmu, dvar = _moments_from(records)
    if not var > 0:
        raise EstimationError(f"non-positive variance estimate {var} at phi_hd={phi_hd}")
    fisher = fisher_from_moments(QuadratureDerivatives(mu, var, dmu, dvar))
    zero = fisher < ZERO_FISHER
    return CostEstimate(
        cost=cost_from_fisher(fisher), fisher=0.0 if zero else fisher,
        mu=mu, var=var, dmu_dphi=dmu, dvar_dphi=dvar, records=records, fisher_zero=zero)


def estimate_gradient(bench, phi_hd: float, phi_alpha: float, n_samples: int | None = None,
                      s_alpha: float = QUARTER_PI, cost: CostEstimate | None = None) -> GradientEstimate:
    """Parameter-shift estimate of grad C with respect to (phi_HD, phi_alpha).

    phi_HD: every ingredient is a shifted combination of basis measurements.
    grad V and grad dV/dphi reuse the five cost records; grad dmu/dphi needs
    two extra bases at phi_HD +/- pi.

    phi_alpha: the probe is re-prepared at phi_alpha +/- s_alpha and measured
    at phi_HD and phi_HD +/- pi/4 (six records). The mean is first-harmonic in
    phi_alpha (weight 1/(2 sin s)); the variance terms contain only the
    zeroth and second harmonic (weight 1/sin 2s).
    """
    if abs(math.sin(2 * s_alpha)) < 1e-6:
        raise ValueError("s_alpha must avoid multiples of pi/2 (second-harmonic rule is singular)")
    if cost is None:
        cost = estimate_cost(bench, phi_hd, phi_alpha, n_samples)
    if cost.fisher_zero:
        raise EstimationError("gradient undefined where the estimated Fisher information vanishes")
    rec = cost.records
    mu0, v0 = rec[0].sample_mean, rec[0].sample_var
    v_p2, v_m2 = rec[1].sample_var, rec[2].sample_var
    v_p4, v_m4 = rec[3].sample_var, rec[4].sample_var

    new = [bench.measure(phi_hd + math.pi, phi_alpha, n_samples),
           bench.measure(phi_hd - math.pi, phi_alpha, n_samples)]
    grad_v_hd = v_p4 - v_m4
    grad_dv_hd = 2 * v0 - v_p2 - v_m2
    grad_dmu_hd = (2 * mu0 - new[0].sample_mean - new[1].sample_mean) / 4

    shifted = {}
    for sign in (1, -1):
        pa = phi_alpha + sign * s_alpha
        rs = [bench.measure(phi_hd + off, pa, n_samples) for off in (0.0, QUARTER_PI, -QUARTER_PI)]
        new.extend(rs)
        c, p, m = rs
        shifted[sign] = (
            c.sample_var,
            (m.sample_mean - p.sample_mean) / (2 * math.sin(QUARTER_PI)),
            m.sample_var - p.sample_var,
        )
    w1 = 1 / (2 * math.sin(s_alpha))
    w2 = 1 / math.sin(2 * s_alpha)
    grad_v_pa = w2 * (shifted[1][0] - shifted[-1][0])
    grad_dmu_pa = w1 * (shifted[1][1] - shifted[-1][1])
    grad_dv_pa = w2 * (shifted[1][2] - shifted[-1][2])

    inputs = FisherGradientInputs(
        q=cost.quadratures,
        dvar_dtheta=np.array([grad_v_hd, grad_v_pa]),
        d2mu_dphidtheta=np.array([grad_dmu_hd, grad_dmu_pa]),
        d2var_dphidtheta=np.array([grad_dv_hd, grad_dv_pa]),
    )
    grad_f = fisher_gradient(inputs)
    grad_c = -grad_f / cost.fisher ** 2
    schedule = {
        "phi_hd": {
            "reused": [(r.phi_hd_requested, r.phi_alpha_requested) for r in rec],
            "new": [(r.phi_hd_requested, r.phi_alpha_requested) for r in new[:2]],
        },
        "phi_alpha": {
            "reused": [],
            "new": [(r.phi_hd_requested, r.phi_alpha_requested) for r in new[2:]],
        },
    }
    used = {k: {"new": len(v["new"]), "reused": len(v["reused"])} for k, v in schedule.items()}
    return GradientEstimate(float(grad_c[0]), float(grad_c[1]), grad_f, cost, used, schedule, new)


def _check_orthogonal(rec_x: MeasurementRecord, rec_p: MeasurementRecord):
    gap = (rec_p.phi_hd_requested - rec_x.phi_hd_requested - HALF_PI) % (2 * math.pi)
    if min(gap, 2 * math.pi - gap) > 1e-9:
        raise ValueError("records must be taken at bases phi and phi + pi/2")


def estimate_alpha(rec_x: MeasurementRecord, rec_p: MeasurementRecord) -> float:
    """Displacement amplitude 1/2 sqrt(<X>^2 + <P>^2) from two orthogonal bases."""
    _check_orthogonal(rec_x, rec_p)
    return 0.5 * math.hypot(rec_x.sample_mean, rec_p.sample_mean)


def estimate_n(rec_x: MeasurementRecord, rec_p: MeasurementRecord) -> float:
    """Mean photon number 1/4 (<X^2> + <P^2> - 2), with <X^2> = var + mean^2.

    The sample variances are unbiased, but each squared sample mean carries an
    extra var/n, so the estimate runs high by about (V_X + V_P)/(4n).
    """
    _check_orthogonal(rec_x, rec_p)
    x2 = rec_x.sample_var + rec_x.sample_mean ** 2
    p2 = rec_p.sample_var + rec_p.sample_mean ** 2
    return 0.25 * (x2 + p2 - 2.0)


def calibration_records(bench, phi_alpha: float = 0.0, n_samples: int | None = None):
    return bench.measure(0.0, phi_alpha, n_samples), bench.measure(HALF_PI, phi_alpha, n_samples)
