"""Gate action on the quadratic operator basis and exact parameter-shift rules.

Operators are coefficient vectors over the ordered basis

    (I, X, P, X^2, P^2, XP, PX)

and a gate maps coefficients as ``c -> M^T c`` where row ``i`` of ``M`` is
the image of basis element ``i`` under the (Heisenberg-picture) gate.
Rows 0-2 form the linear block, rows 3-6 the quadratic block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import GateKind, GateParam

BASIS = ("I", "X", "P", "X2", "P2", "XP", "PX")
DIM = len(BASIS)
LINEAR_ROWS = slice(0, 3)
QUADRATIC_ROWS = slice(3, 7)
BLOCKS = ("linear", "quadratic")

DEFAULT_SHIFT = 0.1
VALIDATION_TOL = 1e-10

_PARAM_ALIASES = {"phi_alpha": "phi", "theta": "phi"}
_VALID_PARAMS = {
    GateKind.SQUEEZE: ("r",),
    GateKind.DISPLACE: ("alpha", "phi"),
    GateKind.ROTATE: ("phi",),
}


def operator(**coeffs) -> np.ndarray:
    """Build a coefficient vector, e.g. ``operator(X2=1.0, I=-0.5)``."""
    vec = np.zeros(DIM)
    for name, value in coeffs.items():
        if name not in BASIS:
            raise KeyError(f"{name!r} is not in the operator basis {BASIS}")
        vec[BASIS.index(name)] = value
    return vec


NUMBER_OPERATOR = operator(I=-0.5, X2=0.25, P2=0.25)


def product_row(a, b):
    """Expand (a0 I + a1 X + a2 P)(b0 I + b1 X + b2 P) over the basis, keeping order."""
    return np.array([
        a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[0] * b[2] + a[2] * b[0],
        a[1] * b[1],
        a[2] * b[2],
        a[1] * b[2],
        a[2] * b[1],
    ])


def _matrix(kind: GateKind, r=0.0, alpha=0.0, phi=0.0) -> np.ndarray:
    # Written out entry by entry; complex arguments are allowed so tests can
    # differentiate by complex step.
    dtype = np.result_type(r, alpha, phi, float)
    m = np.zeros((DIM, DIM), dtype=dtype)
    if kind is GateKind.SQUEEZE:
        em, ep = np.exp(-r), np.exp(r)
        m[np.diag_indices(DIM)] = [1, em, ep, em * em, ep * ep, 1, 1]
        return m
    c, s = np.cos(phi), np.sin(phi)
    m[np.diag_indices(DIM)] = 1
    if kind is GateKind.DISPLACE:
        a = alpha
        m[1, 0] = 2 * a * c
        m[2, 0] = 2 * a * s
        m[3, 0], m[3, 1] = 4 * a * a * c * c, 4 * a * c
        m[4, 0], m[4, 2] = 4 * a * a * s * s, 4 * a * s
        for row in (5, 6):
            m[row, 0] = 4 * a * a * c * s
            m[row, 1] = 2 * a * s
            m[row, 2] = 2 * a * c
        return m
    m[1, 1:3] = c, -s
    m[2, 1:3] = s, c
    m[3, 3:] = c * c, s * s, -c * s, -c * s
    m[4, 3:] = s * s, c * c, c * s, c * s
    m[5, 3:] = c * s, -c * s, c * c, -s * s
    m[6, 3:] = c * s, -c * s, -s * s, c * c
    return m


def gate_matrix(g: GateParam) -> np.ndarray:
    return _matrix(g.kind, g.r, g.alpha, g.phi)


def gate_matrix_derivative(g: GateParam, param: str) -> np.ndarray:
    """Closed-form derivative of ``gate_matrix`` with respect to one parameter."""
    param = _check_param(g.kind, param)
    if g.kind is GateKind.SQUEEZE:
        r = g.r
        return np.diag([0, -np.exp(-r), np.exp(r), -2 * np.exp(-2 * r), 2 * np.exp(2 * r), 0, 0])
    d = np.zeros((DIM, DIM))
    c, s = np.cos(g.phi), np.sin(g.phi)
    if g.kind is GateKind.DISPLACE:
        a = g.alpha
        if param == "alpha":
            d[1, 0], d[2, 0] = 2 * c, 2 * s
            d[3, 0], d[3, 1] = 8 * a * c * c, 4 * c
            d[4, 0], d[4, 2] = 8 * a * s * s, 4 * s
            d[5:, 0], d[5:, 1], d[5:, 2] = 8 * a * c * s, 2 * s, 2 * c
        else:
            d[1, 0], d[2, 0] = -2 * a * s, 2 * a * c
            d[3, 0], d[3, 1] = -8 * a * a * c * s, -4 * a * s
            d[4, 0], d[4, 2] = 8 * a * a * c * s, 4 * a * c
            d[5:, 0] = 4 * a * a * (c * c - s * s)
            d[5:, 1], d[5:, 2] = 2 * a * c, -2 * a * s
        return d
    s2, c2 = 2 * c * s, c * c - s * s
    d[1, 1:3] = -s, -c
    d[2, 1:3] = c, -s
    d[3, 3:] = -s2, s2, -c2, -c2
    d[4, 3:] = s2, -s2, c2, c2
    d[5, 3:] = c2, -c2, -s2, -s2
    d[6, 3:] = c2, -c2, -s2, -s2
    return d


def apply_operator_gate(op, g: GateParam) -> np.ndarray:
    return gate_matrix(g).T @ _check_op(op)


@dataclass(frozen=True)
class ShiftRule:
    """Weighted parameter offsets whose gate-matrix combination is the derivative.

    ``exact`` is False when the rule failed validation against the analytic
    derivative; callers then fall back to the product-rule construction.
    """

    kind: GateKind
    param: str
    block: str
    shifts: tuple[tuple[float, float], ...]
    shift_scale: float | None = None
    exact: bool = True

    def combine(self, g: GateParam) -> np.ndarray:
        return sum(w * _matrix(**_shifted(g, self.param, off)) for off, w in self.shifts)


def _check_param(kind: GateKind, param: str) -> str:
    param = _PARAM_ALIASES.get(param, param)
    if param not in _VALID_PARAMS[kind]:
        raise ValueError(f"{kind.value} gate has no parameter {param!r}")
    return param


def _check_op(op) -> np.ndarray:
    vec = np.asarray(op, dtype=float)
    if vec.shape != (DIM,):
        raise ValueError(
            f"operator must have {DIM} coefficients over {BASIS}; "
            "higher-order operators are not representable")
    return vec


def _shifted(g: GateParam, param: str, offset: float) -> dict:
    # Bypasses GateParam validation: shifted squeeze strengths may dip below zero.
    values = {"kind": g.kind, "r": g.r, "alpha": g.alpha, "phi": g.phi}
    values[param] += offset
    return values


def _antisymmetric(offset, weight):
    return ((offset, weight), (-offset, -weight))


def _candidate_shifts(kind, param, block, s):
    if kind is GateKind.SQUEEZE:
        w = 1 / (2 * np.sinh(s)) if block == "linear" else 1 / np.sinh(2 * s)
        return _antisymmetric(s, w), s
    if kind is GateKind.DISPLACE and param == "alpha":
        return _antisymmetric(s, 1 / (2 * s)), s
    if block == "linear":
        return _antisymmetric(np.pi / 2, 0.5), None
    if kind is GateKind.ROTATE:
        return _antisymmetric(np.pi / 4, 1.0), None
    # Displacement angle, quadratic rows: the pi/4 difference is exact on the
    # second harmonic but overshoots the first harmonic by sqrt(2); the pi/2
    # difference cancels the second harmonic and removes the excess.
    return _antisymmetric(np.pi / 4, 1.0) + _antisymmetric(np.pi / 2, (1 - np.sqrt(2)) / 2), None


def _validation_points(kind, param):
    grid = np.linspace(-np.pi, np.pi, 7)
    if kind is GateKind.SQUEEZE:
        return [GateParam.squeeze(r) for r in np.linspace(0, 2, 5)]
    if kind is GateKind.ROTATE:
        return [GateParam.rotate(p) for p in grid]
    return [GateParam.displace(a, p) for a in (0.3, 1.0, 5.2) for p in grid]


def rule_error(rule: ShiftRule, points=None) -> float:
    """Max-norm gap between the rule and the analytic derivative on its block."""
    rows = LINEAR_ROWS if rule.block == "linear" else QUADRATIC_ROWS
    points = points if points is not None else _validation_points(rule.kind, rule.param)
    worst = 0.0
    for g in points:
        gap = rule.combine(g) - gate_matrix_derivative(g, rule.param)
        scale = max(1.0, np.abs(gate_matrix(g)).max())
        worst = max(worst, np.abs(gap[rows]).max() / scale)
    return worst


def shift_rule_for(kind, param: str, block: str, s: float = DEFAULT_SHIFT) -> ShiftRule:
    kind = GateKind(kind)
    param = _check_param(kind, param)
    if block not in BLOCKS:
        raise ValueError(f"block must be one of {BLOCKS}, got {block!r}")
    if s == 0:
        raise ValueError("shift must be non-zero")
    shifts, scale = _candidate_shifts(kind, param, block, s)
    rule = ShiftRule(kind, param, block, tuple((float(o), float(w)) for o, w in shifts), scale)
    if kind is GateKind.DISPLACE and param == "phi" and block == "quadratic":
        ok = rule_error(rule) < VALIDATION_TOL
        rule = ShiftRule(rule.kind, rule.param, rule.block, rule.shifts, scale, exact=ok)
    return rule


def product_rule_quadratic(g: GateParam, param: str, s: float = DEFAULT_SHIFT) -> np.ndarray:
    """Quadratic rows of dM/dparam from linear-block shift rules and d(AB) = dA B + A dB."""
    lin = gate_matrix(g)[LINEAR_ROWS, LINEAR_ROWS]
    dlin = shift_rule_for(g.kind, param, "linear", s).combine(g)[LINEAR_ROWS, LINEAR_ROWS]
    out = np.zeros((4, DIM))
    for row, (i, j) in enumerate(((1, 1), (2, 2), (1, 2), (2, 1))):
        out[row] = product_row(dlin[i], lin[j]) + product_row(lin[i], dlin[j])
    return out


def derivative_matrix(g: GateParam, param: str, s: float = DEFAULT_SHIFT) -> np.ndarray:
    """dM/dparam assembled from shifted gate evaluations only."""
    param = _check_param(g.kind, param)
    d = np.zeros((DIM, DIM))
    d[LINEAR_ROWS] = shift_rule_for(g.kind, param, "linear", s).combine(g)[LINEAR_ROWS]
    quad = shift_rule_for(g.kind, param, "quadratic", s)
    if quad.exact:
        d[QUADRATIC_ROWS] = quad.combine(g)[QUADRATIC_ROWS]
    else:
        d[QUADRATIC_ROWS] = product_rule_quadratic(g, param, s)
    return d


def shifted_derivative(op, g: GateParam, param: str, s: float = DEFAULT_SHIFT) -> np.ndarray:
    return derivative_matrix(g, param, s).T @ _check_op(op)


def expectation(op, state) -> float:
    """<op> for a Gaussian state, using <XP> = <X><P> + C_XP + i and <PX> = ... - i.

    The imaginary parts cancel for Hermitian combinations; only the real part
    is returned.
    """
    vec = _check_op(op)
    x, p = state.mean
    cov = state.cov
    moments = np.array([
        1.0, x, p,
        cov[0, 0] + x * x, cov[1, 1] + p * p,
        cov[0, 1] + x * p, cov[0, 1] + x * p,
    ])
    return float(vec @ moments)
