import math

import numpy as np
import pytest

from varsense.bench import BenchConfig, MeasurementRecord, Perturbation, VirtualBench
from varsense.fisher import landscape_minimum
from varsense.optimize import (
    AnalyticObjective,
    BenchObjective,
    BOConfig,
    EpochRecord,
    GDConfig,
    OptimizationTrace,
    best_seen,
    random_warm_start,
    reconvergence_epochs,
    run_bayesian_optimization,
    run_gradient_descent,
    warm_start_from_trace,
    wrap_angle,
)

NOISELESS = BenchConfig().noiseless()
C_MIN, PHI_MIN, _ = landscape_minimum(NOISELESS.r, NOISELESS.alpha, NOISELESS.eta)


def rec(epoch, cost, true_cost=None, event=None):
    return EpochRecord(epoch, "gd", 0.0, 0.0, cost, None, None, 1, epoch, cost if true_cost is None else true_cost,
                       event=event)


@pytest.mark.parametrize("x,expected", [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi),
                                        (3 * math.pi / 2, -math.pi / 2), (7.0, 7.0 - 2 * math.pi)])
def test_wrap_angle(x, expected):
    assert wrap_angle(x) == pytest.approx(expected)


def test_gd_converges_on_noiseless_bench():
    trace = run_gradient_descent(VirtualBench(NOISELESS), GDConfig())
    final = trace.records[-1]
    assert final.true_cost <= 1.05 * C_MIN
    assert abs(math.remainder(final.phi_hd - PHI_MIN, math.pi)) < 0.05
    assert [r.epoch for r in trace.records] == list(range(1, 51))
    assert all(-math.pi < r.phi_hd <= math.pi and -math.pi < r.phi_alpha <= math.pi for r in trace.records)


def test_zero_learning_rate_holds_settings():
    trace = run_gradient_descent(VirtualBench(NOISELESS), GDConfig(learning_rate=0.0, epochs=5))
    assert {(r.phi_hd, r.phi_alpha) for r in trace.records} == {(0.6, 2.0)}


def test_small_steps_descend_monotonically():
    cfg = GDConfig(learning_rate=(0.5, 5.0), epochs=15, n_samples=1_000_000)
    costs = run_gradient_descent(VirtualBench(NOISELESS), cfg).column("true_cost")
    assert np.all(np.diff(costs) <= 1e-3 * costs[:-1])


def test_gd_measurement_accounting():
    trace = run_gradient_descent(VirtualBench(NOISELESS), GDConfig(epochs=3))
    assert trace.column("measurements").tolist() == [13, 13, 13]
    assert trace.records[-1].total_measurements == 39


def test_kick_recovery():
    sched = [Perturbation(15, 0.5, 0.5)]
    trace = run_gradient_descent(VirtualBench(BenchConfig(rng_seed=4)), GDConfig(epochs=30), sched)
    assert trace.records[14].event == "kick"
    back = reconvergence_epochs(trace)
    assert back[15] is not None and back[15] <= 14


class FlakyBench(VirtualBench):
    """Returns an impossible variance for every measurement during epoch 2."""

    def measure(self, phi_hd, phi_alpha, n_samples=None, seed=None):
        r = super().measure(phi_hd, phi_alpha, n_samples, seed)
        if 13 <= self.calls - 1 < 18:
            return MeasurementRecord(r.phi_hd_requested, r.phi_alpha_requested, r.sample_mean, -1.0,
                                     r.n_samples, r.seed_used)
        return r


def test_sentinel_epoch_holds_settings():
    trace = run_gradient_descent(FlakyBench(NOISELESS), GDConfig(epochs=4))
    bad = trace.records[1]
    assert bad.event == "sentinel" and math.isinf(bad.cost) and bad.gradient is None
    assert (trace.records[2].phi_hd, trace.records[2].phi_alpha) == (bad.phi_hd, bad.phi_alpha)


def test_trace_rejects_non_increasing_epochs():
    t = OptimizationTrace([rec(1, 1.0)])
    with pytest.raises(ValueError):
        t.append(rec(1, 0.5))


def test_reconvergence_scan():
    costs = [5, 3, 2, 1, 1, 9, 4, 1.05, 1, 8, 7, 6, 5]
    events = {6: "kick", 10: "kick"}
    trace = OptimizationTrace([rec(e, c, event=events.get(e)) for e, c in enumerate(costs, 1)])
    assert reconvergence_epochs(trace) == {6: 2, 10: None}
    assert reconvergence_epochs(trace, window=1) == {6: None, 10: None}


def test_bo_on_analytic_landscape_from_small_warm_start():
    objective = AnalyticObjective(NOISELESS)
    warm = random_warm_start(objective, 20, rng=3)
    trace = run_bayesian_optimization(objective, warm, BOConfig(epochs=50, seed=3))
    assert trace.best("true_cost").true_cost <= 1.05 * C_MIN
    assert trace.column("measurements").sum() == 0


def test_bo_fine_tuning_never_regresses_and_counts_calls():
    bench = VirtualBench(NOISELESS.replace(rng_seed=2))
    gd = run_gradient_descent(bench, GDConfig(epochs=20))
    objective = BenchObjective(bench)
    warm = warm_start_from_trace(gd) + random_warm_start(objective, 30, rng=2)
    before = best_seen(OptimizationTrace(), warm)
    trace = run_bayesian_optimization(objective, warm, BOConfig(epochs=8, seed=2))
    assert best_seen(trace, warm) <= before
    assert trace.column("measurements").tolist() == [5] * 8
    points = {(r.phi_hd, r.phi_alpha) for r in trace.records}
    assert len(points) == 8
    assert trace.meta["warm_start"]["sources"] == {"gd": 20, "random": 30}


def test_bo_requires_warm_start():
    with pytest.raises(ValueError):
        run_bayesian_optimization(AnalyticObjective(NOISELESS), [], BOConfig(epochs=1))


def test_presets_resolve_priors():
    tuned, loose = BOConfig().priors(), BOConfig(preset="loose").priors()
    assert loose[0].mean == pytest.approx(tuned[0].mean + math.log(100))
    custom = BOConfig(lengthscale_prior=(0.0, 1.0)).priors()[0]
    assert (custom.mean, custom.std) == (0.0, 1.0)
