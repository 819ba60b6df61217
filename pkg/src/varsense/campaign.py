"""Config-driven campaigns: build the bench, run the optimisers, write the outputs.

Seed derivation. The campaign seed ``s`` is the bench ``rng_seed``; every bench
call draws the sub-seed ``derive_seed(s, stream, call index)``. The random
warm-start locations use ``derive_seed(s, 1)`` and GP hyperparameter restarts
``derive_seed(s, 2)``. Nothing reads the clock.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bench import BenchConfig, Perturbation, VirtualBench, derive_seed, true_cost
from .gaussian import photon_number, probe_state
from .kernels import BACKEND
from .optimize import (
    AnalyticObjective,
    BenchObjective,
    BOConfig,
    GDConfig,
    OptimizationTrace,
    candidate_grid,
    random_warm_start,
    run_bayesian_optimization,
    run_gradient_descent,
    warm_start_from_trace,
)
from .traceio import summarize, write_trace

MODES = ("gd", "bo", "gd-then-bo", "landscape")
WARM_START_SIZE = 136
WARM_START_STREAM = 1
GP_STREAM = 2


class ConfigError(ValueError):
    """The campaign configuration is incomplete or inconsistent."""


class CampaignError(RuntimeError):
    """The campaign started but could not finish; partial outputs were written."""


@dataclass(frozen=True)
class LandscapeConfig:
    grid_size: int = 200
    include_phase_noise: bool = False
    overlay: bool = True


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    trace: str = "trace.jsonl"
    manifest: str = "manifest.json"
    landscape: str = "landscape.csv"
    overlay: str = "overlay.csv"


@dataclass(frozen=True)
class CampaignConfig:
    mode: str
    seed: int
    bench: BenchConfig = field(default_factory=BenchConfig)
    gd: GDConfig = field(default_factory=GDConfig)
    bo: BOConfig = field(default_factory=BOConfig)
    warm_start_random: int | None = None
    bo_objective: str = "bench"
    perturbations: tuple[Perturbation, ...] = ()
    landscape: LandscapeConfig = field(default_factory=LandscapeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def random_warm_start_count(self) -> int:
        if self.warm_start_random is not None:
            return self.warm_start_random
        if self.mode == "gd-then-bo":
            return max(WARM_START_SIZE - self.gd.epochs, 0)
        return WARM_START_SIZE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["perturbations"] = [asdict(p) for p in self.perturbations]
        return d


def _section(cls, raw, name: str, **extra):
    raw = dict(raw or {})
    raw.update(extra)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {unknown}")
    for key, value in raw.items():
        if isinstance(value, list):
            raw[key] = tuple(value)
    try:
        return cls(**raw)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid '{name}' section: {exc}") from None


def parse_config(raw: dict, seed: int | None = None) -> CampaignConfig:
    """Validate a config mapping. ``seed`` overrides the file's seed."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    allowed = {"mode", "seed", "bench", "gd", "bo", "perturbations", "landscape", "output"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    seed = raw.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    bench_raw = dict(raw.get("bench") or {})
    if "rng_seed" in bench_raw:
        raise ConfigError("bench.rng_seed is derived from the campaign seed; set 'seed' instead")
    bench = _section(BenchConfig, bench_raw, "bench", rng_seed=seed)
    gd = _section(GDConfig, raw.get("gd"), "gd")
    bo_raw = dict(raw.get("bo") or {})
    warm_random = bo_raw.pop("warm_start_random", None)
    objective = bo_raw.pop("objective", "bench")
    if objective not in ("bench", "analytic"):
        raise ConfigError("bo.objective must be 'bench' or 'analytic'")
    if "seed" in bo_raw:
        raise ConfigError("bo.seed is derived from the campaign seed")
    bo = _section(BOConfig, bo_raw, "bo", seed=derive_seed(seed, GP_STREAM))
    if bo.preset not in ("tuned", "loose", "strict"):
        raise ConfigError(f"unknown bo.preset {bo.preset!r}")
    if bo.epochs < 1 or bo.grid_size < 2:
        raise ConfigError("bo.epochs must be >= 1 and bo.grid_size >= 2")
    perturbations = raw.get("perturbations") or []
    if not isinstance(perturbations, list):
        raise ConfigError("perturbations must be a list")
    schedule = tuple(_section(Perturbation, p, "perturbations") for p in perturbations)
    landscape = _section(LandscapeConfig, raw.get("landscape"), "landscape")
    output = _section(OutputConfig, raw.get("output"), "output")
    if warm_random is not None and (not isinstance(warm_random, int) or warm_random < 0):
        raise ConfigError("bo.warm_start_random must be a non-negative integer")
    cfg = CampaignConfig(mode=mode, seed=seed, bench=bench, gd=gd, bo=bo,
                         warm_start_random=warm_random, bo_objective=objective,
                         perturbations=schedule, landscape=landscape, output=output)
    if mode == "bo" and cfg.random_warm_start_count() < 1:
        raise ConfigError("mode 'bo' needs a non-empty random warm start")
    return cfg


def load_raw(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return raw


def load_config(path, seed: int | None = None) -> CampaignConfig:
    return parse_config(load_raw(path), seed)


def probe_photon_number(bench: BenchConfig) -> float:
    """Mean photon number of the prepared probe (before loss)."""
    return photon_number(probe_state(bench.r, bench.alpha, 0.0))


def landscape_grid(cfg: CampaignConfig) -> tuple[np.ndarray, np.ndarray]:
    grid = candidate_grid(cfg.landscape.grid_size, cfg.bo.bounds)
    costs = true_cost(cfg.bench, grid[:, 0], grid[:, 1],
                      include_phase_noise=cfg.landscape.include_phase_noise)
    return grid, np.asarray(costs)


def write_landscape(path, grid, costs) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi_hd", "phi_alpha", "true_cost"])
        for (a, b), c in zip(grid, costs):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
    return path


def write_overlay(path, trace: OptimizationTrace) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "optimizer", "phi_hd", "phi_alpha", "cost", "true_cost", "event"])
        for r in trace.records:
            w.writerow([r.epoch, r.optimizer, repr(r.phi_hd), repr(r.phi_alpha), repr(r.cost),
                        repr(r.true_cost), r.event or ""])
    return path


def _run_optimisers(cfg: CampaignConfig, trace: OptimizationTrace, meta: dict):
    bench = VirtualBench(cfg.bench)
    if cfg.mode in ("gd", "gd-then-bo", "landscape"):
        run_gradient_descent(bench, cfg.gd, cfg.perturbations, trace=trace)
        meta["gd"] = {k: v for k, v in trace.meta.items() if k != "gd_config"}
    if cfg.mode in ("bo", "gd-then-bo"):
        objective = (AnalyticObjective(cfg.bench) if cfg.bo_objective == "analytic"
                     else BenchObjective(bench, cfg.bo.n_samples))
        warm = warm_start_from_trace(trace) if cfg.mode == "gd-then-bo" else []
        rng = np.random.default_rng(derive_seed(cfg.seed, WARM_START_STREAM))
        warm += random_warm_start(objective, cfg.random_warm_start_count(), rng, cfg.bo.bounds)
        run_bayesian_optimization(objective, warm, cfg.bo, trace=trace)
        meta["bo"] = {k: trace.meta[k] for k in ("warm_start", "hyperparameters", "aborted")
                      if k in trace.meta}
    meta["bench_calls"] = bench.calls


def run_campaign(cfg: CampaignConfig, out_dir=None) -> dict:
    """Execute one campaign and write its trace, manifest and landscape files.

    Returns the manifest. Raises :class:`CampaignError` after flushing the
    partial trace when an optimiser fails.
    """
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = OptimizationTrace()
    manifest = {
        "varsense_version": __version__,
        "backend": BACKEND,
        "config": cfg.to_dict(),
        "seeds": {
            "campaign": cfg.seed,
            "bench_rng_seed": cfg.bench.rng_seed,
            "warm_start": derive_seed(cfg.seed, WARM_START_STREAM),
            "gp_restarts": cfg.bo.seed,
            "scheme": "bench call k of stream j uses derive_seed(seed, j, k)",
        },
        "files": {},
    }
    error = None
    try:
        _run_optimisers(cfg, trace, manifest)
    except Exception as exc:  # flush whatever was recorded, then report
        error = exc
        manifest["error"] = f"{type(exc).__name__}: {exc}"
    write_trace(out / cfg.output.trace, trace)
    manifest["files"]["trace"] = cfg.output.trace
    if cfg.mode == "landscape" and error is None:
        grid, costs = landscape_grid(cfg)
        write_landscape(out / cfg.output.landscape, grid, costs)
        manifest["files"]["landscape"] = cfg.output.landscape
        finite = np.isfinite(costs)
        j = int(np.argmin(np.where(finite, costs, np.inf)))
        manifest["landscape_minimum"] = {"phi_hd": float(grid[j, 0]), "phi_alpha": float(grid[j, 1]),
                                         "true_cost": float(costs[j])}
        if cfg.landscape.overlay:
            write_overlay(out / cfg.output.overlay, trace)
            manifest["files"]["overlay"] = cfg.output.overlay
    if trace.records:
        manifest["summary"] = summarize(trace, probe_photon_number(cfg.bench))
    aborted = manifest.get("bo", {}).get("aborted")
    (out / cfg.output.manifest).write_text(
        json.dumps(manifest, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    if error is not None:
        raise CampaignError(manifest["error"]) from error
    if aborted:
        raise CampaignError(f"Bayesian optimisation aborted: {aborted}")
    return manifest


def run_many(raw: dict, seeds, out_dir, parallel: int = 1) -> list[dict]:
    """Run the config once per seed under ``out_dir/seed-<s>``; seeds are independent."""
    jobs = [(parse_config(raw, s), Path(out_dir) / f"seed-{s}") for s in seeds]
    if parallel <= 1:
        return [run_campaign(c, d) for c, d in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=parallel) as pool:
        futures = [pool.submit(run_campaign, c, d) for c, d in jobs]
        return [f.result() for f in futures]
