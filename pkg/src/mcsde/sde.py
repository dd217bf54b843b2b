"""Estimator dynamics as a stochastic differential equation.

A Monte Carlo mean over N samples, reparameterized by the variance time
tau = N^(-1/2), evolves (in decreasing tau) like the reverse of a drift-free
variance-exploding diffusion: drift p (y - mu) / tau pulls toward the mean
while the noise amplitude sigma sqrt(p) tau^((p-1)/2) shuts off as tau -> 0.
The default exponent p = 2 makes the marginal law exactly N(mu, sigma^2 tau^2).

Simulation is plain Euler-Maruyama on a decreasing tau grid that never
touches tau = 0 (the drift has an explicit 1/tau).  Ensembles draw their
noise from counter-based keys (seed, step, trajectory), so results are
independent of scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import CounterRng

TAU_FLOOR = 1e-4


@dataclass(frozen=True)
class SdeParams:
    """Mean, per-sample deviation and sample-count exponent of one process.

    ``exponent_p`` is the polynomial exponent in the sample-count map
    N(tau) = tau^(-p); any p > 1 gives a noise level that vanishes at
    tau -> 0, p = 1 is the constant-noise boundary (accepted for tests,
    not a production default).  ``sigma`` may be 0 for the deterministic
    flow limit.
    """

    mu: float
    sigma: float
    exponent_p: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValidationError(f"mu must be finite, got {self.mu}")
        if not np.isfinite(self.sigma) or self.sigma < 0.0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        if not np.isfinite(self.exponent_p) or self.exponent_p < 1.0:
            raise ValidationError(
                f"exponent_p must be >= 1 (noise would explode at tau -> 0), got {self.exponent_p}"
            )


@dataclass(frozen=True)
class CovMatrix2:
    """2x2 covariance of the (diffuse, specular) per-sample vector."""

    var_d: float
    var_s: float
    cov_ds: float

    def __post_init__(self):
        eps = 1e-12 * max(1.0, abs(self.var_d) + abs(self.var_s))
        if self.var_d < -eps or self.var_s < -eps:
            raise ValidationError("variances must be nonnegative")
        if self.det < -eps:
            raise ValidationError(
                f"covariance must be positive semidefinite, det = {self.det}"
            )

    @property
    def det(self) -> float:
        return self.var_d * self.var_s - self.cov_ds**2

    @property
    def total_variance(self) -> float:
        """Variance of the summed components: var_d + 2 cov_ds + var_s."""
        return self.var_d + 2.0 * self.cov_ds + self.var_s

    def matrix(self) -> np.ndarray:
        return np.array([[self.var_d, self.cov_ds], [self.cov_ds, self.var_s]])


@dataclass(frozen=True)
class Trajectory:
    """States along a strictly decreasing, strictly positive tau grid."""

    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if taus.ndim != 1 or np.any(np.diff(taus) >= 0.0) or np.any(taus <= 0.0):
            raise ValidationError("taus must be strictly decreasing and positive")
        if values.shape[0] != taus.shape[0]:
            raise ValidationError("values and taus must have equal length")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)


def tau_of_n(n_samples) -> np.ndarray | float:
    """Variance time of a sample count: tau = N^(-1/2)."""
    n = np.asarray(n_samples, dtype=np.float64)
    if np.any(n <= 0.0):
        raise ValidationError("sample count must be positive")
    out = n**-0.5
    return float(out) if out.ndim == 0 else out


def n_of_tau(tau) -> np.ndarray | float:
    """Sample count at a variance time: N = tau^(-2)."""
    t = np.asarray(tau, dtype=np.float64)
    if np.any(t <= 0.0):
        raise ValidationError("tau must be positive")
    out = t**-2.0
    return float(out) if out.ndim == 0 else out


def drift(y, params: SdeParams, tau):
    """Mean-reverting rate p (y - mu) / tau of the reverse-time process."""
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau <= 0.0):
        raise ValidationError("tau must be positive")
    return params.exponent_p * (np.asarray(y, dtype=np.float64) - params.mu) / tau


def diffusion_coeff(params: SdeParams, tau):
    """Noise amplitude sigma sqrt(p tau^(p-1)); constant sigma at p = 1."""
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau <= 0.0):
        raise ValidationError("tau must be positive")
    p = params.exponent_p
    return params.sigma * np.sqrt(p * tau ** (p - 1.0))


def ve_forward_marginal(params: SdeParams, tau) -> tuple[float, float]:
    """Clean-start forward marginal: mean mu, variance sigma^2 tau^p.

    This is the integral of the squared noise amplitude from 0 to tau;
    for the default p = 2 it is exactly sigma^2 tau^2.
    """
    tau = float(tau)
    if tau < 0.0:
        raise ValidationError("tau must be >= 0")
    return params.mu, params.sigma**2 * tau**params.exponent_p


def tau_grid(tau_start: float, tau_end: float, n_steps: int, spacing: str = "geometric") -> np.ndarray:
    """Decreasing tau grid with n_steps intervals (n_steps + 1 points)."""
    if not (tau_start > tau_end > 0.0):
        raise ValidationError(
            f"need tau_start > tau_end > 0, got {tau_start}, {tau_end}"
        )
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    if spacing == "geometric":
        return tau_start * (tau_end / tau_start) ** (np.arange(n_steps + 1) / n_steps)
    if spacing == "linear":
        return np.linspace(tau_start, tau_end, n_steps + 1)
    raise ValidationError(f"unknown spacing {spacing!r}")


def _em_steps(values, taus, mu, sigma, p, noise_for_step):
    """March `values` down the tau grid in place-free Euler-Maruyama form."""
    out = [values]
    y = values
    for i in range(len(taus) - 1):
        t0, t1 = taus[i], taus[i + 1]
        dt = t1 - t0  # negative
        y = y + p * (y - mu) / t0 * dt
        if sigma > 0.0:
            amp = sigma * np.sqrt(p) * t0 ** ((p - 1.0) / 2.0)
            y = y + amp * np.sqrt(-dt) * noise_for_step(i)
        out.append(y)
    return out


def simulate_reverse(
    params: SdeParams,
    tau_start: float,
    tau_end: float,
    n_steps: int,
    init: float,
    rng: CounterRng,
    spacing: str = "geometric",
    trajectory_index: int = 0,
) -> Trajectory:
    """One Euler-Maruyama path from tau_start down to tau_end.

    With sigma = 0 this is the deterministic contraction
    y(tau) - mu = (init - mu) (tau / tau0)^p up to O(step) error.
    """
    taus = tau_grid(tau_start, tau_end, n_steps, spacing)
    vals = _em_steps(
        np.float64(init),
        taus,
        params.mu,
        params.sigma,
        params.exponent_p,
        lambda i: rng.normal(trajectory_index, i),
    )
    return Trajectory(taus=taus, values=np.array(vals))


def simulate_reverse_ensemble(
    params: SdeParams,
    tau_start: float,
    tau_end: float,
    n_steps: int,
    n_trajectories: int,
    seed: int,
    init: np.ndarray | None = None,
    spacing: str = "geometric",
    record_taus=None,
):
    """Ensemble of reverse paths; returns (recorded_taus, values).

    ``values`` has shape (n_trajectories, n_recorded).  When ``init`` is
    None, trajectories start on the forward marginal at tau_start,
    N(mu, sigma^2 tau_start^p).  ``record_taus`` selects checkpoint values
    (snapped to the nearest grid point); by default only start and end are
    recorded to keep memory flat.
    """
    taus = tau_grid(tau_start, tau_end, n_steps, spacing)
    rng = CounterRng(seed)
    if init is None:
        _, var0 = ve_forward_marginal(params, tau_start)
        init = params.mu + np.sqrt(var0) * rng.normal(np.arange(n_trajectories), -1, 0)
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (n_trajectories,):
        raise ValidationError("init must have shape (n_trajectories,)")

    if record_taus is None:
        record_idx = np.array([0, len(taus) - 1])
    else:
        record_idx = np.unique(
            [int(np.argmin(np.abs(taus - t))) for t in np.asarray(record_taus)]
        )
    record_set = {int(i): k for k, i in enumerate(sorted(record_idx))}

    traj_ids = np.arange(n_trajectories)
    out = np.empty((n_trajectories, len(record_set)))
    y = init
    if 0 in record_set:
        out[:, record_set[0]] = y
    p, mu, sigma = params.exponent_p, params.mu, params.sigma
    for i in range(len(taus) - 1):
        t0, t1 = taus[i], taus[i + 1]
        dt = t1 - t0
        y = y + p * (y - mu) / t0 * dt
        if sigma > 0.0:
            amp = sigma * np.sqrt(p) * t0 ** ((p - 1.0) / 2.0)
            y = y + amp * np.sqrt(-dt) * rng.normal(traj_ids, i, 1)
        if (i + 1) in record_set:
            out[:, record_set[i + 1]] = y
    return taus[sorted(record_set)], out


def cholesky2(cov: CovMatrix2) -> np.ndarray:
    """Lower-triangular factor L with L L^T equal to the covariance.

    Near-singular inputs get a diagonal jitter of 1e-12 * trace so the
    factorization stays real; rendered covariances are frequently close to
    rank one.
    """
    a, b, c = cov.var_d, cov.cov_ds, cov.var_s
    trace = a + c
    # jitter only when the matrix is (near-)rank-deficient, so clean inputs
    # factor exactly
    near_singular = cov.det <= 1e-12 * max(trace * trace, 1e-300)
    jitter = 1e-12 * trace if near_singular else 0.0
    a_j, c_j = a + jitter, c + jitter
    if a_j <= 0.0:
        if abs(b) > 0.0:
            raise ValidationError("invalid covariance: zero variance with nonzero cross term")
        return np.array([[0.0, 0.0], [0.0, np.sqrt(max(c_j, 0.0))]])
    l11 = np.sqrt(a_j)
    l21 = b / l11
    rem = c_j - l21 * l21
    if rem < -1e-9 * max(1.0, trace):
        raise ValidationError("covariance is not positive semidefinite")
    return np.array([[l11, 0.0], [l21, np.sqrt(max(rem, 0.0))]])


def simulate_vector_reverse(
    mu2,
    cov: CovMatrix2,
    exponent_p: float,
    tau_start: float,
    tau_end: float,
    n_steps: int,
    init,
    rng: CounterRng,
    spacing: str = "geometric",
    trajectory_index: int = 0,
) -> Trajectory:
    """Coupled two-component reverse path with correlated noise.

    The increment covariance over one step is p tau^(p-1) Sigma |dtau|
    (2 tau Sigma |dtau| at the default p = 2); correlation enters through a
    PSD factor of Sigma applied to independent normal pairs.
    """
    mu2 = np.asarray(mu2, dtype=np.float64)
    if mu2.shape != (2,):
        raise ValidationError("mu2 must be a 2-vector")
    if exponent_p < 1.0:
        raise ValidationError("exponent_p must be >= 1")
    taus = tau_grid(tau_start, tau_end, n_steps, spacing)
    factor = cholesky2(cov)
    y = np.asarray(init, dtype=np.float64).copy()
    if y.shape != (2,):
        raise ValidationError("init must be a 2-vector")
    vals = [y]
    p = exponent_p
    for i in range(len(taus) - 1):
        t0, t1 = taus[i], taus[i + 1]
        dt = t1 - t0
        xi = rng.normal(trajectory_index, i, np.arange(2))
        amp = np.sqrt(p) * t0 ** ((p - 1.0) / 2.0)
        y = y + p * (y - mu2) / t0 * dt + amp * np.sqrt(-dt) * (factor @ xi)
        vals.append(y)
    return Trajectory(taus=taus, values=np.array(vals))


def simulate_vector_reverse_ensemble(
    mu2,
    cov: CovMatrix2,
    exponent_p: float,
    tau_start: float,
    tau_end: float,
    n_steps: int,
    n_trajectories: int,
    seed: int,
    init: np.ndarray | None = None,
    spacing: str = "geometric",
    record_taus=None,
):
    """Vector ensemble; returns (recorded_taus, values (n_traj, n_rec, 2))."""
    mu2 = np.asarray(mu2, dtype=np.float64)
    taus = tau_grid(tau_start, tau_end, n_steps, spacing)
    factor = cholesky2(cov)
    rng = CounterRng(seed)
    if init is None:
        # forward marginal at tau_start: mean mu2, covariance tau_start^p Sigma
        scale = tau_start ** (exponent_p / 2.0)
        xi0 = rng.normal(np.arange(n_trajectories)[:, None], -1, np.arange(2)[None, :])
        init = mu2 + scale * xi0 @ factor.T
    init = np.asarray(init, dtype=np.float64)
    if init.shape != (n_trajectories, 2):
        raise ValidationError("init must have shape (n_trajectories, 2)")

    if record_taus is None:
        record_idx = np.array([0, len(taus) - 1])
    else:
        record_idx = np.unique(
            [int(np.argmin(np.abs(taus - t))) for t in np.asarray(record_taus)]
        )
    record_set = {int(i): k for k, i in enumerate(sorted(record_idx))}

    traj_ids = np.arange(n_trajectories)[:, None]
    out = np.empty((n_trajectories, len(record_set), 2))
    y = init.copy()
    if 0 in record_set:
        out[:, record_set[0]] = y
    p = exponent_p
    for i in range(len(taus) - 1):
        t0, t1 = taus[i], taus[i + 1]
        dt = t1 - t0
        xi = rng.normal(traj_ids, i, np.arange(2)[None, :])
        amp = np.sqrt(p) * t0 ** ((p - 1.0) / 2.0)
        y = y + p * (y - mu2) / t0 * dt + amp * np.sqrt(-dt) * xi @ factor.T
        if (i + 1) in record_set:
            out[:, record_set[i + 1]] = y
    return taus[sorted(record_set)], out


def drift_boundedness_stat(
    params: SdeParams,
    taus,
    ensemble_size: int,
    seed: int,
    quantiles=(0.5, 0.9, 0.99),
):
    """Distribution of |drift| under the forward marginal at each tau.

    States are drawn from N(mu, sigma^2 tau^p); since (y - mu)/tau then has
    a tau-independent law at p = 2, the reported quantiles are flat across
    the grid -- the apparent 1/tau singularity is exactly compensated.
    Returns a list of dicts: {tau, mean_abs, q<levels...>}.
    """
    rng = CounterRng(seed)
    rows = []
    for j, tau in enumerate(np.asarray(taus, dtype=np.float64)):
        _, var = ve_forward_marginal(params, float(tau))
        y = params.mu + np.sqrt(var) * rng.normal(j, np.arange(ensemble_size))
        mag = np.abs(drift(y, params, tau))
        row = {"tau": float(tau), "mean_abs": float(mag.mean())}
        for q in quantiles:
            row[f"q{int(round(q * 100)):02d}"] = float(np.quantile(mag, q))
        rows.append(row)
    return rows


def write_trajectories_csv(path, trajectories) -> None:
    """Dump trajectories: traj_id, tau, value (or value_d, value_s)."""
    trajectories = list(trajectories)
    vector = trajectories and trajectories[0].values.ndim == 2
    header = ["traj_id", "tau", "value_d", "value_s"] if vector else ["traj_id", "tau", "value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for tid, traj in enumerate(trajectories):
            for k in range(traj.taus.size):
                if vector:
                    writer.writerow(
                        [tid, repr(float(traj.taus[k])),
                         repr(float(traj.values[k, 0])), repr(float(traj.values[k, 1]))]
                    )
                else:
                    writer.writerow([tid, repr(float(traj.taus[k])), repr(float(traj.values[k]))])


def write_marginals_csv(path, params: SdeParams, taus, values) -> None:
    """Ensemble marginal summary: tau, mean, var, expected_var."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "mean", "var", "expected_var"])
        for k, tau in enumerate(np.asarray(taus, dtype=np.float64)):
            col = values[:, k]
            _, expected = ve_forward_marginal(params, float(tau))
            var = float(col.var(ddof=1)) if col.size >= 2 else float("nan")
            writer.writerow(
                [repr(float(tau)), repr(float(col.mean())), repr(var), repr(expected)]
            )
