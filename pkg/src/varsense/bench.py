"""Virtual experiment: noisy displaced squeezed probe read out by homodyne detection."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .fisher import ZERO_FISHER, analytic_fisher, lossy_variance
from .gaussian import GateParam, LossChannelParam, apply_gate, apply_loss, vacuum

NOISE_MODES = ("per_sample", "per_batch")


@dataclass(frozen=True)
class BenchConfig:
    """Physical and sampling parameters of the virtual experiment.

    Defaults reproduce the simulated setup: r = 1.52, |alpha| = 5.2,
    eta = 0.72, no thermal photons and 30 mrad RMS phase noise between the
    local oscillator and the probe.
    """

    r: float = 1.52
    alpha: float = 5.2
    eta: float = 0.72
    n_bar: float = 0.0
    phase_noise_rms: float = 0.03
    phase_noise_mean: float = 0.0
    displacement_phase_noise_rms: float = 0.0
    phase_noise_mode: str = "per_sample"
    samples_per_measurement: int = 10_000
    rng_seed: int = 0

    def __post_init__(self):
        if self.r < 0 or self.alpha < 0:
            raise ValueError("squeeze strength and displacement must be >= 0")
        LossChannelParam(self.eta, self.n_bar)
        if self.phase_noise_rms < 0 or self.displacement_phase_noise_rms < 0:
            raise ValueError("phase-noise RMS must be >= 0")
        if self.phase_noise_mode not in NOISE_MODES:
            raise ValueError(f"phase_noise_mode must be one of {NOISE_MODES}")
        if self.samples_per_measurement < 2:
            raise ValueError("need at least two samples per measurement")

    def replace(self, **changes) -> BenchConfig:
        values = asdict(self)
        values.update(changes)
        return BenchConfig(**values)

    def noiseless(self) -> BenchConfig:
        return self.replace(phase_noise_rms=0.0, phase_noise_mean=0.0,
                            displacement_phase_noise_rms=0.0)


@dataclass(frozen=True)
class MeasurementRecord:
    phi_hd_requested: float
    phi_alpha_requested: float
    sample_mean: float
    sample_var: float
    n_samples: int
    seed_used: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Perturbation:
    """A one-off kick at ``epoch`` or a drift of the given rate per epoch from ``epoch`` on."""

    epoch: int
    delta_phi_hd: float = 0.0
    delta_phi_alpha: float = 0.0
    kind: str = "kick"

    def __post_init__(self):
        if self.kind not in ("kick", "drift"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")


def _prepared_moments(cfg: BenchConfig):
    # Displacement commutes with the (linear) loss channel on the mean, so the
    # displacement enters the sampler as an amplitude sqrt(eta) * 2 alpha.
    state = apply_gate(vacuum(), GateParam.squeeze(cfg.r))
    state = apply_loss(state, LossChannelParam(cfg.eta, cfg.n_bar))
    return state.mean, state.cov, 2.0 * cfg.alpha * math.sqrt(cfg.eta)


def derive_seed(*entropy: int) -> int:
    """63-bit seed derived deterministically from integer entropy."""
    state = np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def measure(cfg: BenchConfig, phi_hd: float, phi_alpha: float,
            n_samples: int | None = None, seed: int | None = None) -> MeasurementRecord:
    """Draw one homodyne sample set and return its statistics.

    Phase noise is a Gaussian offset of the measurement basis, drawn per
    sample (or once per batch) with the configured RMS.
    """
    n = int(n_samples or cfg.samples_per_measurement)
    if n < 2:
        raise ValueError("need at least two samples per measurement")
    seed = derive_seed(cfg.rng_seed) if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    mean, cov, disp = _prepared_moments(cfg)
    z = rng.standard_normal(n)
    basis_offsets = disp_offsets = None
    phi = float(phi_hd)
    if cfg.phase_noise_rms > 0 or cfg.phase_noise_mean != 0:
        if cfg.phase_noise_mode == "per_sample":
            basis_offsets = cfg.phase_noise_mean + cfg.phase_noise_rms * rng.standard_normal(n)
        else:
            phi += cfg.phase_noise_mean + cfg.phase_noise_rms * rng.standard_normal()
    if cfg.displacement_phase_noise_rms > 0:
        disp_offsets = cfg.displacement_phase_noise_rms * rng.standard_normal(n)
    mu, var = kernels.homodyne_sample_stats(
        mean[0], mean[1], disp, phi_alpha, cov[0, 0], cov[0, 1], cov[1, 1], phi, z,
        basis_offsets=basis_offsets, disp_offsets=disp_offsets)
    return MeasurementRecord(float(phi_hd), float(phi_alpha), float(mu), float(var), n, seed)


@dataclass
class VirtualBench:
    """Stateful handle on the virtual experiment.

    Every call to :meth:`measure` consumes one sub-seed derived from
    ``(cfg.rng_seed, stream, call index)``, so a run is replayable from the
    config alone. Not thread-safe; use one bench per worker.
    """

    cfg: BenchConfig = field(default_factory=BenchConfig)
    stream: int = 0
    calls: int = 0
    drift: tuple[float, float] = (0.0, 0.0)

    def next_seed(self) -> int:
        seed = derive_seed(self.cfg.rng_seed, self.stream, self.calls)
        self.calls += 1
        return seed

    def measure(self, phi_hd: float, phi_alpha: float, n_samples: int | None = None,
                seed: int | None = None) -> MeasurementRecord:
        """Measure at the requested settings; the physical phases include any drift."""
        seed = self.next_seed() if seed is None else seed
        rec = measure(self.cfg, phi_hd + self.drift[0], phi_alpha + self.drift[1],
                      n_samples, seed)
        if self.drift != (0.0, 0.0):
            rec = MeasurementRecord(float(phi_hd), float(phi_alpha), rec.sample_mean,
                                    rec.sample_var, rec.n_samples, rec.seed_used)
        return rec


def kick_offset(schedule, epoch: int) -> tuple[float, float]:
    d_hd = sum(p.delta_phi_hd for p in schedule if p.kind == "kick" and p.epoch == epoch)
    d_pa = sum(p.delta_phi_alpha for p in schedule if p.kind == "kick" and p.epoch == epoch)
    return d_hd, d_pa


def drift_offset(schedule, epoch: int) -> tuple[float, float]:
    d_hd = d_pa = 0.0
    for p in schedule:
        if p.kind == "drift" and epoch >= p.epoch:
            d_hd += p.delta_phi_hd * (epoch - p.epoch)
            d_pa += p.delta_phi_alpha * (epoch - p.epoch)
    return d_hd, d_pa


def apply_perturbations(settings, schedule, epoch: int) -> tuple[float, float]:
    """Settings plus the kick scheduled for ``epoch`` and the cumulative drift."""
    k = kick_offset(schedule, epoch)
    d = drift_offset(schedule, epoch)
    return settings[0] + k[0] + d[0], settings[1] + k[1] + d[1]


def true_cost(cfg: BenchConfig, phi_hd, phi_alpha, include_phase_noise: bool = False,
              n_samples: int = 1):
    """Noise-free cost 1/(n F) from the closed form; ``inf`` where F vanishes.

    With ``include_phase_noise`` the variance is broadened by the first-order
    phase-noise term (dmu/dphi * sigma)^2.
    """
    phi_hd = np.asarray(phi_hd, dtype=float)
    phi_alpha = np.asarray(phi_alpha, dtype=float)
    if include_phase_noise and cfg.phase_noise_rms > 0:
        amp = 2 * np.sqrt(cfg.eta) * cfg.alpha
        sig2 = cfg.phase_noise_rms ** 2
        x = phi_alpha - phi_hd
        dmu = amp * np.sin(x)
        var = lossy_variance(phi_hd, cfg.r, cfg.eta) + sig2 * dmu ** 2
        dvar = (2 * cfg.eta * np.sinh(2 * cfg.r) * np.sin(2 * phi_hd)
                - 2 * sig2 * amp ** 2 * np.sin(x) * np.cos(x))
        fisher = dmu ** 2 / var + dvar ** 2 / (2 * var ** 2)
    else:
        fisher = analytic_fisher(phi_hd, phi_alpha, cfg.r, cfg.alpha, cfg.eta)
    with np.errstate(divide="ignore"):
        out = np.where(fisher < ZERO_FISHER, np.inf, 1.0 / (n_samples * fisher))
    return float(out) if out.ndim == 0 else out
