"""Variational optimisation of a simulated squeezed-light phase sensor.

Gaussian probe states, homodyne read-out, Fisher-information cost with
parameter-shift gradients, and gradient-descent / Bayesian optimisers that
run against a noisy virtual bench.
"""

from .bench import BenchConfig, MeasurementRecord, Perturbation, VirtualBench, measure, true_cost
from .estimation import CostEstimate, GradientEstimate, estimate_alpha, estimate_cost, estimate_gradient, estimate_n
from .fisher import (
    QuadratureDerivatives,
    analytic_fisher,
    cost_from_fisher,
    fisher_from_moments,
    landscape_minimum,
    optimal_measurement_angle,
    shot_noise_limit_cost,
)
from .gaussian import GateParam, GaussianState, LossChannelParam, apply_gate, apply_loss, homodyne_moments, probe_state
from .gp import GPModel, expected_improvement, gp_fit, gp_predict
from .kernels import BACKEND
from .optimize import (
    BOConfig,
    GDConfig,
    OptimizationTrace,
    run_bayesian_optimization,
    run_gradient_descent,
)
from .shift import apply_operator_gate, gate_matrix, gate_matrix_derivative, shift_rule_for

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BOConfig", "BenchConfig", "CostEstimate", "GDConfig", "GPModel", "GateParam",
    "GaussianState", "GradientEstimate", "LossChannelParam", "MeasurementRecord",
    "OptimizationTrace", "Perturbation", "QuadratureDerivatives", "VirtualBench",
    "analytic_fisher", "apply_gate", "apply_loss", "apply_operator_gate", "cost_from_fisher",
    "estimate_alpha", "estimate_cost", "estimate_gradient", "estimate_n", "expected_improvement",
    "fisher_from_moments", "gate_matrix", "gate_matrix_derivative", "gp_fit", "gp_predict",
    "homodyne_moments", "landscape_minimum", "measure", "optimal_measurement_angle",
    "probe_state", "run_bayesian_optimization", "run_gradient_descent", "shift_rule_for",
    "shot_noise_limit_cost", "true_cost",
]
