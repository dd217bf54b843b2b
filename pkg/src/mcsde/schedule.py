"""Discrete diffusion noise schedules and the sample-count alignment.

A schedule stores the cumulative signal coefficient a(t) (so the forward
process is x_t = a(t) x0 + s(t) eps with a^2 + s^2 = 1) together with its
log-SNR table lambda(t) = log a^2 - log s^2, which is strictly decreasing
and therefore invertible up to quantization.  Matching that table against
the estimator-side log-SNR, lambda = A - 2 log tau, turns a sample count
into a timestep; the constant A is fixed by anchoring the noisiest and
cleanest points of a target sample-count range and averaging the two
solutions.

Timesteps are 1-based: t = 1 is the cleanest step, t = T the noisiest.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import RelativeAccuracyUndefinedError, ValidationError

DEFAULT_N_MIN = 0.001
DEFAULT_N_MAX = 5000.0


@dataclass(frozen=True)
class NoiseSchedule:
    """Discrete forward-noising schedule of length T."""

    alpha_bar: np.ndarray
    sigma_vp: np.ndarray
    log_snr: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha_bar, dtype=np.float64)
        s = np.asarray(self.sigma_vp, dtype=np.float64)
        lam = np.asarray(self.log_snr, dtype=np.float64)
        if a.ndim != 1 or a.size < 2:
            raise ValidationError("schedule needs at least two steps")
        if np.any(a <= 0.0) or np.any(a > 1.0):
            raise ValidationError("alpha_bar values must lie in (0, 1]")
        diffs = np.diff(a)
        if diffs[0] > 0.0 or np.any(diffs[1:] >= 0.0):
            raise ValidationError("alpha_bar must be strictly decreasing after the first step")
        if np.max(np.abs(a * a + s * s - 1.0)) > 1e-12:
            raise ValidationError("alpha_bar^2 + sigma_vp^2 must equal 1")
        if np.any(np.diff(lam) >= 0.0):
            raise ValidationError("log_snr must be strictly decreasing")
        object.__setattr__(self, "alpha_bar", a)
        object.__setattr__(self, "sigma_vp", s)
        object.__setattr__(self, "log_snr", lam)

    @property
    def num_steps(self) -> int:
        return self.alpha_bar.size

    @classmethod
    def from_alpha_bar(cls, alpha_bar: np.ndarray) -> "NoiseSchedule":
        a = np.asarray(alpha_bar, dtype=np.float64)
        a2 = a * a
        s = np.sqrt(1.0 - a2)
        with np.errstate(divide="raise"):
            lam = np.log(a2) - np.log(1.0 - a2)
        return cls(alpha_bar=a, sigma_vp=s, log_snr=lam)

    def eta_diff(self) -> np.ndarray:
        """Effective noise sigma_vp(t)^2 / alpha_bar(t)^2 per step."""
        return (self.sigma_vp / self.alpha_bar) ** 2

    def max_adjacent_gap(self) -> float:
        return float(np.max(np.abs(np.diff(self.log_snr))))


def build_linear_schedule(num_steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """DDPM-style schedule with per-step noise rates linear in t."""
    if num_steps < 2:
        raise ValidationError("num_steps must be >= 2")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValidationError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    betas = np.linspace(beta_start, beta_end, num_steps)
    alpha_bar = np.sqrt(np.cumprod(1.0 - betas))
    return NoiseSchedule.from_alpha_bar(alpha_bar)


def build_cosine_schedule(num_steps: int, offset_s: float = 0.008) -> NoiseSchedule:
    """Squared-cosine signal profile with the usual per-step rate clip."""
    if num_steps < 2:
        raise ValidationError("num_steps must be >= 2")
    if not (0.0 < offset_s < 1.0):
        raise ValidationError(f"offset_s must be a small positive value, got {offset_s}")
    t = np.arange(num_steps + 1) / num_steps
    f = np.cos((t + offset_s) / (1.0 + offset_s) * np.pi / 2.0) ** 2
    betas = np.clip(1.0 - f[1:] / f[:-1], 1e-12, 0.999)
    alpha_bar = np.sqrt(np.cumprod(1.0 - betas))
    return NoiseSchedule.from_alpha_bar(alpha_bar)


def log_snr_mc(tau: float, kappa: float = 1.0, sigma: float = 1.0) -> float:
    """Estimator-side log-SNR: log kappa - log sigma^2 - 2 log tau."""
    if tau <= 0.0 or kappa <= 0.0 or sigma <= 0.0:
        raise ValidationError("tau, kappa and sigma must be positive")
    return math.log(kappa) - math.log(sigma * sigma) - 2.0 * math.log(tau)


def compute_anchor(schedule: NoiseSchedule, n_min: float = DEFAULT_N_MIN,
                   n_max: float = DEFAULT_N_MAX) -> float:
    """Offset A aligning the schedule with a sample-count range.

    The noisiest point tau_max = n_min^(-1/2) is anchored at the last step
    and the cleanest point tau_min = n_max^(-1/2) at the first; each anchor
    solves lambda(t) = A - 2 log tau for A, and the two solutions are
    averaged.
    """
    if not (0.0 < n_min < n_max):
        raise ValidationError(f"need 0 < n_min < n_max, got {n_min}, {n_max}")
    tau_max = n_min**-0.5
    tau_min = n_max**-0.5
    a_noisy = schedule.log_snr[-1] + 2.0 * math.log(tau_max)
    a_clean = schedule.log_snr[0] + 2.0 * math.log(tau_min)
    return 0.5 * (a_noisy + a_clean)


@dataclass(frozen=True)
class TauMapper:
    """Anchored alignment between variance time and discrete timestep."""

    schedule: NoiseSchedule
    anchor_a: float
    n_min: float = DEFAULT_N_MIN
    n_max: float = DEFAULT_N_MAX

    def __post_init__(self):
        if not (0.0 < self.n_min < self.n_max):
            raise ValidationError("need 0 < n_min < n_max")

    @classmethod
    def anchored(cls, schedule: NoiseSchedule, n_min: float = DEFAULT_N_MIN,
                 n_max: float = DEFAULT_N_MAX) -> "TauMapper":
        return cls(schedule=schedule, anchor_a=compute_anchor(schedule, n_min, n_max),
                   n_min=n_min, n_max=n_max)

    def lambda_target(self, tau: float) -> float:
        if tau <= 0.0:
            raise ValidationError("tau must be positive")
        return self.anchor_a - 2.0 * math.log(tau)


def map_tau_to_t(mapper: TauMapper, tau: float) -> int:
    """Timestep whose log-SNR is closest to the target at ``tau``.

    Ties break toward the smaller (cleaner) timestep; the result lies in
    [1, T].  Because both log-SNR curves are strictly decreasing, the map
    is nonincreasing in sample count.
    """
    target = mapper.lambda_target(tau)
    # argmin returns the first minimizer, which is the smaller t
    return int(np.argmin(np.abs(mapper.schedule.log_snr - target))) + 1


def map_n_to_t(mapper: TauMapper, n_samples: float) -> int:
    if n_samples <= 0.0:
        raise ValidationError("sample count must be positive")
    return map_tau_to_t(mapper, n_samples**-0.5)


@dataclass(frozen=True)
class BandwidthModel:
    """Power-law spectral model: recoverable bandwidth ~ noise^(-1/exponent)."""

    spectrum_exponent: float = 2.0
    bandwidth_scale: float = 1.0

    def __post_init__(self):
        if self.spectrum_exponent <= 0.0:
            raise ValidationError("spectrum_exponent must be positive")
        if self.bandwidth_scale <= 0.0:
            raise ValidationError("bandwidth_scale must be positive")


def recoverable_bandwidth(effective_noise: float, model: BandwidthModel) -> float:
    """Highest recoverable frequency at a given effective noise level."""
    if np.any(np.asarray(effective_noise) <= 0.0):
        raise ValidationError("effective_noise must be positive")
    out = model.bandwidth_scale * np.asarray(effective_noise, dtype=np.float64) ** (
        -1.0 / model.spectrum_exponent
    )
    return float(out) if out.ndim == 0 else out


def effective_noise_mc(sigma: float, tau: float) -> float:
    """Estimator-side effective noise sigma^2 tau^2."""
    return sigma * sigma * tau * tau


def stabilization_time(schedule: NoiseSchedule, model: BandwidthModel,
                       f_target: float):
    """First timestep, scanning from the clean end, whose recoverable
    bandwidth reaches ``f_target``; None when no step reaches it.

    The per-step bandwidth decreases from the clean end to the noisy end,
    so the scan resolves to the cleanest step whenever the target is
    achievable at all; ordering over target frequencies is what downstream
    claims consume (higher frequencies never stabilize earlier).
    """
    if f_target <= 0.0:
        raise ValidationError("f_target must be positive")
    f_c = recoverable_bandwidth(schedule.eta_diff(), model)
    reached = np.flatnonzero(f_c >= f_target)
    if reached.size == 0:
        return None
    return int(reached[0]) + 1


def min_samples_for_accuracy(mu_r: float, sigma_r: float, epsilon: float) -> tuple[float, float]:
    """Accuracy scale of one component: (tau_star, n_star).

    tau_star = eps |mu| / sigma is the largest variance time at which the
    squared deviation stays below (eps mu)^2; n_star = tau_star^(-2) is the
    matching minimum sample count.
    """
    if mu_r == 0.0:
        raise RelativeAccuracyUndefinedError(
            "relative accuracy undefined: component mean is zero"
        )
    if sigma_r <= 0.0 or epsilon <= 0.0:
        raise ValidationError("sigma_r and epsilon must be positive")
    tau_star = epsilon * abs(mu_r) / sigma_r
    n_star = (sigma_r * sigma_r) / (epsilon * epsilon * mu_r * mu_r)
    return tau_star, n_star


def write_schedule_csv(path, schedule: NoiseSchedule) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "alpha_bar", "sigma_vp", "log_snr"])
        for i in range(schedule.num_steps):
            writer.writerow(
                [i + 1, repr(float(schedule.alpha_bar[i])),
                 repr(float(schedule.sigma_vp[i])), repr(float(schedule.log_snr[i]))]
            )


def read_schedule_csv(path) -> NoiseSchedule:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "alpha_bar", "sigma_vp", "log_snr"]:
            raise ValidationError(f"{path}: unexpected schedule CSV header")
        rows = [r for r in reader if r]
    return NoiseSchedule(
        alpha_bar=np.array([float(r[1]) for r in rows]),
        sigma_vp=np.array([float(r[2]) for r in rows]),
        log_snr=np.array([float(r[3]) for r in rows]),
    )


def write_mapper_report_csv(path, mapper: TauMapper, n_values) -> None:
    """Alignment report: N, tau, lambda_target, t_star, lambda_at_t_star, residual."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "tau", "lambda_target", "t_star", "lambda_at_t_star", "residual"])
        for n in n_values:
            tau = float(n) ** -0.5
            target = mapper.lambda_target(tau)
            t_star = map_tau_to_t(mapper, tau)
            lam = float(mapper.schedule.log_snr[t_star - 1])
            writer.writerow(
                [repr(float(n)), repr(tau), repr(target), t_star, repr(lam), repr(lam - target)]
            )
