"""Gradient descent and Bayesian optimisation of the two control phases."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bench import VirtualBench, drift_offset, kick_offset, true_cost
from .estimation import EstimationError, estimate_cost, estimate_gradient
from .gp import GPFitError, GPModel, LogNormalPrior, expected_improvement, gp_fit, gp_predict

log = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = "1.0"


def wrap_angle(x):
    """Map angles into (-pi, pi]; values already in range are returned unchanged."""
    wrapped = math.pi - (math.pi - np.asarray(x, dtype=float)) % (2 * math.pi)
    out = np.where((x > -math.pi) & (x <= math.pi), x, wrapped)
    return float(out) if out.ndim == 0 else out


@dataclass
class EpochRecord:
    epoch: int
    optimizer: str
    phi_hd: float
    phi_alpha: float
    cost: float
    mu: float | None
    var: float | None
    measurements: int
    total_measurements: int
    true_cost: float
    gradient: list[float] | None = None
    ei_max: float | None = None
    event: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = TRACE_SCHEMA_VERSION
        return d


@dataclass
class OptimizationTrace:
    records: list[EpochRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def append(self, rec: EpochRecord):
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epochs must increase monotonically")
        self.records.append(rec)

    def best(self, key: str = "cost") -> EpochRecord:
        finite = [r for r in self.records if math.isfinite(getattr(r, key))]
        if not finite:
            raise ValueError("trace has no finite costs")
        return min(finite, key=lambda r: getattr(r, key))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def settings(self) -> np.ndarray:
        return np.array([[r.phi_hd, r.phi_alpha] for r in self.records])

    def mean_step(self) -> float:
        """Mean distance between consecutive settings, each angle difference wrapped to (-pi, pi]."""
        s = self.settings()
        if len(s) < 2:
            return 0.0
        return float(np.linalg.norm(wrap_angle(np.diff(s, axis=0)), axis=1).mean())


# ---------------------------------------------------------------- gradient descent


@dataclass(frozen=True)
class GDConfig:
    """Plain gradient descent on the sampled single-shot cost.

    The cost is small (1/F ~ 4e-3 at the optimum) so learning rates are
    large compared to textbook values. ``learning_rate`` is a scalar or a
    per-parameter pair (phi_HD, phi_alpha): the landscape is far stiffer in
    phi_HD than in phi_alpha, so a single rate crawls along phi_alpha.
    """

    learning_rate: float | tuple[float, float] = (3.0, 40.0)
    epochs: int = 50
    initial_settings: tuple[float, float] = (0.6, 2.0)
    n_samples: int | None = None
    s_alpha: float = math.pi / 4
    max_step: float | None = None

    def __post_init__(self):
        rates = np.broadcast_to(np.asarray(self.learning_rate, dtype=float), (2,))
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("learning_rate must be finite and >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def run_gradient_descent(bench: VirtualBench, cfg: GDConfig = GDConfig(), schedule=(),
                         trace: OptimizationTrace | None = None) -> OptimizationTrace:
    """Epoch loop: perturb, estimate cost and gradient, step, record.

    Kicks are added to the settings once at their epoch (epochs count from
    1); drifts offset the physical phases seen by the bench. An epoch whose
    cost is the infinite sentinel leaves the settings unchanged.
    """
    trace = trace if trace is not None else OptimizationTrace()
    trace.meta.setdefault("optimizer", "gd")
    trace.meta["gd_config"] = asdict(cfg)
    settings = np.array(cfg.initial_settings, dtype=float)
    rates = np.broadcast_to(np.asarray(cfg.learning_rate, dtype=float), (2,))
    total = 0
    for epoch in range(1, cfg.epochs + 1):
        kick = kick_offset(schedule, epoch)
        event = "kick" if kick != (0.0, 0.0) else None
        settings = np.array([wrap_angle(settings[0] + kick[0]), wrap_angle(settings[1] + kick[1])])
        drift = drift_offset(schedule, epoch)
        bench.drift = drift
        before = bench.calls
        physical = (settings[0] + drift[0], settings[1] + drift[1])
        grad = None
        try:
            cost = estimate_cost(bench, settings[0], settings[1], cfg.n_samples)
        except EstimationError as exc:
            log.warning("epoch %d: %s", epoch, exc)
            cost = None
        if cost is None or cost.fisher_zero:
            event = "sentinel"
            log.info("epoch %d: infinite cost at %s, settings held", epoch, settings.tolist())
        else:
            g = estimate_gradient(bench, settings[0], settings[1], cfg.n_samples,
                                  s_alpha=cfg.s_alpha, cost=cost)
            grad = g.vector
        used = bench.calls - before
        total += used
        trace.append(EpochRecord(
            epoch=epoch, optimizer="gd", phi_hd=float(settings[0]), phi_alpha=float(settings[1]),
            cost=math.inf if cost is None else cost.cost,
            mu=None if cost is None else cost.mu, var=None if cost is None else cost.var,
            measurements=used, total_measurements=total,
            true_cost=true_cost(bench.cfg, *physical),
            gradient=None if grad is None else grad.tolist(), event=event))
        if grad is not None:
            step = rates * grad
            if cfg.max_step is not None:
                norm = np.linalg.norm(step)
                if norm > cfg.max_step:
                    step *= cfg.max_step / norm
            settings = np.array([wrap_angle(v) for v in settings - step])
    bench.drift = (0.0, 0.0)
    trace.meta["final_settings"] = settings.tolist()
    return trace


# ---------------------------------------------------------------- Bayesian optimisation

# Lognormal (mean of log, std of log) priors. "loose" moves the lengthscale
# prior mean up by a factor of 100; "strict" pins both hyperparameters far
# below the scales of the landscape.
PRESETS = {
    "tuned": {"lengthscale_prior": (math.log(0.3), 0.5), "output_scale_prior": (0.0, 1.0)},
    "loose": {"lengthscale_prior": (math.log(30.0), 0.05), "output_scale_prior": (0.0, 1.0)},
    "strict": {"lengthscale_prior": (math.log(0.003), 0.05), "output_scale_prior": (math.log(0.01), 0.05)},
}


@dataclass(frozen=True)
class BOConfig:
    """Bayesian-optimisation settings.

    The GP models ``log(cost)`` by default (``output_transform="log"``): the
    cost spans several decades over the search space and the minimiser is
    unchanged by a monotone transform. Priors are lognormal ``(mean of log,
    std of log)`` on the lengthscale (radians) and on the output scale of
    the standardised outputs.
    """

    epochs: int = 50
    grid_size: int = 200
    bounds: tuple[float, float] = (-math.pi, math.pi)
    preset: str = "tuned"
    lengthscale_prior: tuple[float, float] | None = None
    output_scale_prior: tuple[float, float] | None = None
    n_starts: int = 16
    refit_starts: int = 1
    output_transform: str = "log"
    n_samples: int | None = None
    seed: int = 0
    exclude_queried: bool = True

    def priors(self):
        base = PRESETS[self.preset]
        ls = self.lengthscale_prior or base["lengthscale_prior"]
        os_ = self.output_scale_prior or base["output_scale_prior"]
        return LogNormalPrior(*ls), LogNormalPrior(*os_)


@dataclass
class WarmPoint:
    phi_hd: float
    phi_alpha: float
    cost: float
    source: str = "random"


class BenchObjective:
    """Five-measurement cost estimate on a virtual bench."""

    def __init__(self, bench: VirtualBench, n_samples: int | None = None):
        self.bench = bench
        self.n_samples = n_samples

    def __call__(self, phi_hd, phi_alpha):
        before = self.bench.calls
        try:
            est = estimate_cost(self.bench, phi_hd, phi_alpha, self.n_samples)
            out = (est.cost, est.mu, est.var)
        except EstimationError as exc:
            log.warning("cost estimate failed at (%g, %g): %s", phi_hd, phi_alpha, exc)
            out = (math.inf, None, None)
        return out + (self.bench.calls - before,)

    def true_cost(self, phi_hd, phi_alpha):
        return true_cost(self.bench.cfg, phi_hd, phi_alpha)


class AnalyticObjective:
    """Noise-free closed-form cost; uses no measurements."""

    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, phi_hd, phi_alpha):
        return true_cost(self.cfg, phi_hd, phi_alpha), None, None, 0

    def true_cost(self, phi_hd, phi_alpha):
        return true_cost(self.cfg, phi_hd, phi_alpha)


def random_warm_start(objective, n: int, rng, bounds=(-math.pi, math.pi)) -> list[WarmPoint]:
    rng = np.random.default_rng(rng)
    pts = rng.uniform(bounds[0], bounds[1], size=(n, 2))
    return [WarmPoint(float(a), float(b), objective(a, b)[0], "random") for a, b in pts]


def warm_start_from_trace(trace: OptimizationTrace) -> list[WarmPoint]:
    return [WarmPoint(r.phi_hd, r.phi_alpha, r.cost, r.optimizer) for r in trace.records]


def _transform(costs, how):
    costs = np.asarray(costs, dtype=float)
    finite = np.isfinite(costs) & (costs > 0)
    out = np.log(np.where(finite, costs, 1.0)) if how == "log" else np.where(finite, costs, 0.0)
    # Sentinel (infinite) costs are replaced by a cap just above the worst finite value.
    cap = out[finite].max() + (1.0 if how == "log" else abs(out[finite].max())) if finite.any() else 0.0
    return np.where(finite, out, cap)


def candidate_grid(size: int, bounds=(-math.pi, math.pi)) -> np.ndarray:
    axis = np.linspace(bounds[0], bounds[1], size)
    hd, pa = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([hd.ravel(), pa.ravel()])


def _fit_with_retry(model, n_starts, rng):
    try:
        return gp_fit(model, n_starts=n_starts, rng=rng)
    except GPFitError:
        log.warning("GP fit failed, retrying with inflated noise")
        bumped = model.with_data(model.inputs, model.outputs)
        bumped.noise = max(model.noise * 10, 1e-4)
        return gp_fit(bumped, n_starts=n_starts, rng=rng)


def incumbent(model) -> float:
    """Lowest posterior mean over the observed inputs.

    With noisy costs the raw minimum is a lucky draw that the true landscape
    cannot beat, which starves EI near the optimum; the posterior mean at the
    observed points is the plug-in incumbent.
    """
    return float(np.min(gp_predict(model, model.inputs)[0]))


def run_bayesian_optimization(objective, warm_start: list[WarmPoint], cfg: BOConfig = BOConfig(),
                              candidates: np.ndarray | None = None,
                              trace: OptimizationTrace | None = None) -> OptimizationTrace:
    """Fit GP, query argmax EI on the candidate grid, measure, repeat.

    ``objective`` is a :class:`BenchObjective`, :class:`AnalyticObjective`, a
    :class:`VirtualBench` (wrapped automatically) or any callable returning
    ``(cost, mu, var, n_measurements)``. Grid points already queried are
    excluded. The trace records every BO epoch; the warm start is summarised
    in ``trace.meta``.
    """
    if not warm_start:
        raise ValueError("warm start must contain at least one point")
    if isinstance(objective, VirtualBench):
        objective = BenchObjective(objective, cfg.n_samples)
    trace = trace if trace is not None else OptimizationTrace()
    trace.meta.setdefault("optimizer", "bo")
    trace.meta["bo_config"] = asdict(cfg)
    sources = {}
    for w in warm_start:
        sources[w.source] = sources.get(w.source, 0) + 1
    trace.meta["warm_start"] = {"size": len(warm_start), "sources": sources,
                                "best_cost": min(w.cost for w in warm_start)}
    rng = np.random.default_rng(cfg.seed)
    grid = candidate_grid(cfg.grid_size, cfg.bounds) if candidates is None else np.asarray(candidates)
    available = np.ones(len(grid), dtype=bool)
    x = [[w.phi_hd, w.phi_alpha] for w in warm_start]
    costs = [w.cost for w in warm_start]
    ls_prior, os_prior = cfg.priors()
    model = GPModel(lengthscale=math.exp(ls_prior.mean), output_scale=math.exp(os_prior.mean),
                    lengthscale_prior=ls_prior, output_scale_prior=os_prior)
    start_epoch = trace.records[-1].epoch if trace.records else 0
    total = trace.records[-1].total_measurements if trace.records else 0
    for i in range(1, cfg.epochs + 1):
        y = _transform(costs, cfg.output_transform)
        model = model.with_data(np.array(x), y)
        try:
            model = _fit_with_retry(model, cfg.n_starts if i == 1 else cfg.refit_starts, rng)
        except GPFitError as exc:
            log.error("aborting BO at epoch %d: %s", i, exc)
            trace.meta["aborted"] = str(exc)
            break
        ei = expected_improvement(model, grid, incumbent(model))
        ei = np.where(available, ei, -1.0)
        j = int(np.argmax(ei))
        if cfg.exclude_queried:
            available[j] = False
        phi_hd, phi_alpha = grid[j]
        cost, mu, var, used = objective(phi_hd, phi_alpha)
        total += used
        x.append([phi_hd, phi_alpha])
        costs.append(cost)
        trace.append(EpochRecord(
            epoch=start_epoch + i, optimizer="bo", phi_hd=float(phi_hd), phi_alpha=float(phi_alpha),
            cost=cost, mu=mu, var=var, measurements=used, total_measurements=total,
            true_cost=objective.true_cost(phi_hd, phi_alpha), ei_max=float(ei[j]),
            event="sentinel" if not math.isfinite(cost) else None))
    trace.meta["hyperparameters"] = {"lengthscale": model.lengthscale,
                                     "output_scale": model.output_scale, "noise": model.noise}
    return trace


def best_seen(trace: OptimizationTrace, warm_start: list[WarmPoint] = ()) -> float:
    """Lowest measured cost over the warm start and the trace (monotone by construction)."""
    vals = [w.cost for w in warm_start] + [r.cost for r in trace.records]
    finite = [v for v in vals if math.isfinite(v)]
    return min(finite) if finite else math.inf


def reconvergence_epochs(trace: OptimizationTrace, factor: float = 1.1, key: str = "true_cost",
                         window: int | None = None) -> dict[int, int | None]:
    """Epochs needed after each kick to get back to ``factor`` x the pre-kick best.

    The pre-kick best is the lowest ``key`` value since the previous kick.
    Returns ``{kick epoch: epochs after the kick}``, or ``None`` for a kick
    that does not re-converge (within ``window`` epochs, when given).
    """
    recs = trace.records
    kicks = [i for i, r in enumerate(recs) if r.event == "kick"]
    out = {}
    for n, i in enumerate(kicks):
        start = kicks[n - 1] if n else 0
        before = [getattr(r, key) for r in recs[start:i] if math.isfinite(getattr(r, key))]
        if not before:
            out[recs[i].epoch] = None
            continue
        target = factor * min(before)
        stop = kicks[n + 1] if n + 1 < len(kicks) else len(recs)
        out[recs[i].epoch] = None
        for r in recs[i:stop]:
            if window is not None and r.epoch - recs[i].epoch > window:
                break
            if getattr(r, key) <= target:
                out[recs[i].epoch] = r.epoch - recs[i].epoch
                break
    return out
