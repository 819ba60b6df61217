"""Single-mode Gaussian states and the gates used to prepare the probe.

Conventions: X = a^dag + a, P = i(a^dag - a), [X, P] = 2i, so the vacuum
covariance matrix is the identity and the shot-noise variance is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

PD_TOL = 1e-10


class GateKind(str, Enum):
    SQUEEZE = "squeeze"
    DISPLACE = "displace"
    ROTATE = "rotate"


@dataclass(frozen=True)
class GateParam:
    """Parameters of a single Gaussian gate.

    Only the fields relevant to ``kind`` are read: ``r`` for squeezing,
    ``alpha`` and ``phi`` for displacement, ``phi`` for rotation.
    """

    kind: GateKind
    r: float = 0.0
    alpha: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        if self.r < 0:
            raise ValueError(f"squeeze strength must be >= 0, got {self.r}")
        if self.alpha < 0:
            raise ValueError(f"displacement amplitude must be >= 0, got {self.alpha}")

    @classmethod
    def squeeze(cls, r: float) -> GateParam:
        return cls(GateKind.SQUEEZE, r=r)

    @classmethod
    def displace(cls, alpha: float, phi: float) -> GateParam:
        return cls(GateKind.DISPLACE, alpha=alpha, phi=phi)

    @classmethod
    def rotate(cls, phi: float) -> GateParam:
        return cls(GateKind.ROTATE, phi=phi)

    def replace(self, **changes) -> GateParam:
        values = {"kind": self.kind, "r": self.r, "alpha": self.alpha, "phi": self.phi}
        values.update(changes)
        return GateParam(**values)


@dataclass(frozen=True)
class LossChannelParam:
    eta: float
    n_bar: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmittivity must lie in [0, 1], got {self.eta}")
        if self.n_bar < 0:
            raise ValueError(f"thermal occupation must be >= 0, got {self.n_bar}")


@dataclass(frozen=True)
class GaussianState:
    """First and second moments of one bosonic mode.

    Parameters
    ----------
    mean : array_like, shape (2,)
        Quadrature means (<X>, <P>).
    cov : array_like, shape (2, 2)
        Symmetric covariance matrix [[V_X, C_XP], [C_XP, V_P]].
    """

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("state moments must be finite")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=1e-12):
            raise ValueError("covariance matrix must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] < PD_TOL:
            raise ValueError("covariance matrix must be positive definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def purity_det(self) -> float:
        """det(cov); equals 1 for pure states and exceeds 1 for mixed ones."""
        return float(np.linalg.det(self.cov))

    def __repr__(self):
        return f"GaussianState(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


def vacuum() -> GaussianState:
    return GaussianState(np.zeros(2), np.eye(2))


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def apply_gate(state: GaussianState, g: GateParam) -> GaussianState:
    if g.kind is GateKind.SQUEEZE:
        s = np.diag([np.exp(-g.r), np.exp(g.r)])
        return GaussianState(s @ state.mean, s @ state.cov @ s)
    if g.kind is GateKind.DISPLACE:
        shift = 2.0 * g.alpha * np.array([np.cos(g.phi), np.sin(g.phi)])
        return GaussianState(state.mean + shift, state.cov)
    rot = rotation_matrix(g.phi)
    return GaussianState(rot @ state.mean, rot @ state.cov @ rot.T)


def apply_loss(state: GaussianState, ch: LossChannelParam) -> GaussianState:
    """Mix the mode with a thermal environment on a beamsplitter of transmittivity eta."""
    env = (1.0 - ch.eta) * (2.0 * ch.n_bar + 1.0)
    return GaussianState(np.sqrt(ch.eta) * state.mean, ch.eta * state.cov + env * np.eye(2))


def homodyne_moments(state: GaussianState, phi_hd: float) -> tuple[float, float]:
    """Mean and variance of the quadrature cos(phi) X + sin(phi) P."""
    u = np.array([np.cos(phi_hd), np.sin(phi_hd)])
    return float(u @ state.mean), float(u @ state.cov @ u)


def photon_number(state: GaussianState) -> float:
    v_x, v_p = state.cov[0, 0], state.cov[1, 1]
    x, p = state.mean
    return float(0.25 * (v_x + v_p + x * x + p * p - 2.0))


def to_db(variance: float) -> float:
    """Variance relative to shot noise, in dB."""
    return float(10.0 * np.log10(variance))


def probe_state(r: float, alpha: float, phi_alpha: float, eta: float = 1.0,
                n_bar: float = 0.0) -> GaussianState:
    """Squeezed (X-quadrature) then displaced probe after the loss channel."""
    state = apply_gate(vacuum(), GateParam.squeeze(r))
    state = apply_gate(state, GateParam.displace(alpha, phi_alpha))
    return apply_loss(state, LossChannelParam(eta, n_bar))
