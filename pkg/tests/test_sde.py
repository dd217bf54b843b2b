import math

import numpy as np
import pytest

from mcsde.errors import ValidationError
from mcsde.rng import CounterRng
from mcsde.sde import (
    CovMatrix2,
    SdeParams,
    Trajectory,
    cholesky2,
    diffusion_coeff,
    drift,
    drift_boundedness_stat,
    n_of_tau,
    simulate_reverse,
    simulate_reverse_ensemble,
    simulate_vector_reverse,
    simulate_vector_reverse_ensemble,
    tau_grid,
    tau_of_n,
    ve_forward_marginal,
)

# Phi^-1(0.995), for the 99th percentile of a folded normal
Z_995 = 2.5758293035489004


def test_tau_of_n_values():
    assert tau_of_n(10_000) == 0.01
    assert tau_of_n(1) == 1.0
    assert abs(tau_of_n(0.001) - 31.6227766016838) < 1e-10
    assert abs(n_of_tau(0.01) - 10_000) < 1e-6
    with pytest.raises(ValidationError):
        tau_of_n(0.0)
    with pytest.raises(ValidationError):
        tau_of_n(-3)


def test_drift_values():
    p2 = SdeParams(mu=1.0, sigma=1.0, exponent_p=2.0)
    assert drift(1.0, p2, 0.5) == 0.0
    assert drift(1.5, p2, 0.25) == 4.0
    p3 = SdeParams(mu=0.0, sigma=1.0, exponent_p=3.0)
    assert drift(1.0, p3, 2.0) == 1.5
    with pytest.raises(ValidationError):
        drift(1.0, p2, 0.0)


def test_diffusion_coeff_values_and_monotonicity():
    assert diffusion_coeff(SdeParams(0.0, 1.0, 2.0), 0.5) == 1.0
    assert diffusion_coeff(SdeParams(0.0, 2.0, 2.0), 2.0) == 4.0
    # p = 1 boundary: constant noise amplitude sigma
    p1 = SdeParams(0.0, 1.7, 1.0)
    taus = np.array([2.0, 1.0, 0.1, 0.001])
    assert np.allclose(diffusion_coeff(p1, taus), 1.7)
    for p in (1.5, 2.0, 3.0):
        params = SdeParams(0.0, 1.0, p)
        vals = diffusion_coeff(params, np.sort(taus))
        assert np.all(np.diff(vals) > 0.0)
        # vanishes as tau -> 0 for every p > 1
        assert diffusion_coeff(params, 1e-30) < 1e-7
        assert diffusion_coeff(params, 1e-30) < diffusion_coeff(params, 1e-10)


def test_params_validation():
    with pytest.raises(ValidationError):
        SdeParams(mu=0.0, sigma=-1.0)
    with pytest.raises(ValidationError):
        SdeParams(mu=0.0, sigma=1.0, exponent_p=0.5)
    SdeParams(mu=0.0, sigma=0.0)  # deterministic flow limit is allowed


def test_ve_forward_marginal():
    assert ve_forward_marginal(SdeParams(3.0, 1.0), 0.0) == (3.0, 0.0)
    assert ve_forward_marginal(SdeParams(0.0, 1.0), 0.1)[1] == pytest.approx(0.01)
    assert ve_forward_marginal(SdeParams(0.0, 2.0), 3.0)[1] == pytest.approx(36.0)


def test_sigma_zero_fixed_point():
    params = SdeParams(mu=2.0, sigma=0.0)
    traj = simulate_reverse(params, 1.0, 0.1, 200, init=2.0, rng=CounterRng(0))
    assert np.all(traj.values == 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_deterministic_flow_matches_closed_form(p):
    # oracle: dY = p (Y - mu)/tau dtau has solution Y - mu = (Y0 - mu)(tau/tau0)^p
    mu = 0.7
    params = SdeParams(mu=mu, sigma=0.0, exponent_p=p)
    traj = simulate_reverse(params, 1.0, 0.5, 10_000, init=mu + 1.0, rng=CounterRng(0))
    exact = mu + (0.5 / 1.0) ** p
    assert abs(traj.values[-1] - exact) < 1e-3
    if p == 2.0:
        assert abs(traj.values[-1] - (mu + 0.25)) < 1e-3


def test_marginal_preservation_light():
    params = SdeParams(mu=1.0, sigma=2.0, exponent_p=2.0)
    checkpoints = [1.0, 0.5, 0.2]
    taus, vals = simulate_reverse_ensemble(
        params, 1.0, 0.2, 2_000, n_trajectories=4_000, seed=42, record_taus=checkpoints
    )
    for k, tau in enumerate(taus):
        _, expected = ve_forward_marginal(params, tau)
        col = vals[:, k]
        se = math.sqrt(expected / col.size)
        assert abs(col.mean() - params.mu) <= 3.0 * se
        assert abs(col.var(ddof=1) - expected) <= 0.05 * expected


def test_tau_grid_validation():
    with pytest.raises(ValidationError):
        tau_grid(0.5, 1.0, 10)
    with pytest.raises(ValidationError):
        tau_grid(1.0, 0.0, 10)
    g = tau_grid(1.0, 0.01, 100)
    assert g.size == 101
    assert np.all(np.diff(g) < 0)
    lin = tau_grid(1.0, 0.5, 5, spacing="linear")
    assert np.allclose(np.diff(lin), -0.1)


def test_trajectory_invariants():
    with pytest.raises(ValidationError):
        Trajectory(taus=np.array([1.0, 1.0]), values=np.zeros(2))
    with pytest.raises(ValidationError):
        Trajectory(taus=np.array([1.0, 0.0]), values=np.zeros(2))


def test_cholesky2_identity_exact():
    ident = cholesky2(CovMatrix2(1.0, 1.0, 0.0))
    assert np.array_equal(ident, np.eye(2))


def test_cholesky2_hand_case():
    factor = cholesky2(CovMatrix2(var_d=4.0, var_s=3.0, cov_ds=2.0))
    assert np.allclose(factor, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], rtol=1e-15)
    cov = CovMatrix2(4.0, 3.0, 2.0)
    assert np.allclose(factor @ factor.T, cov.matrix(), rtol=1e-12)


def test_cholesky2_rank_one_jitter():
    cov = CovMatrix2(1.0, 1.0, 1.0)
    factor = cholesky2(cov)
    assert factor[0, 1] == 0.0
    assert np.allclose(factor @ factor.T, cov.matrix(), atol=1e-9)


def test_negative_definite_rejected():
    with pytest.raises(ValidationError):
        CovMatrix2(1.0, 1.0, 2.0)  # det < 0
    with pytest.raises(ValidationError):
        CovMatrix2(-1.0, 1.0, 0.0)


def test_vector_zero_covariance_is_deterministic():
    cov = CovMatrix2(0.0, 0.0, 0.0)
    traj = simulate_vector_reverse(
        [1.0, 2.0], cov, 2.0, 1.0, 0.5, 500, init=[1.5, 2.5], rng=CounterRng(0)
    )
    expect = np.array([1.0, 2.0]) + np.array([0.5, 0.5]) * (traj.taus[-1] / 1.0) ** 2
    assert np.allclose(traj.values[-1], expect, atol=2e-3)


def test_vector_sum_matches_scalar_total_variance():
    # sum of components behaves like the scalar process with
    # sigma_tot^2 = var_d + 2 cov_ds + var_s
    cov = CovMatrix2(1.0, 1.0, 0.0)
    assert cov.total_variance == 2.0
    taus, vals = simulate_vector_reverse_ensemble(
        [0.0, 0.0], cov, 2.0, 1.0, 0.3, 1_500, 4_000, seed=7, record_taus=[1.0, 0.5, 0.3]
    )
    for k, tau in enumerate(taus):
        total = vals[:, k, 0] + vals[:, k, 1]
        expected = cov.total_variance * tau**2
        assert abs(total.var(ddof=1) - expected) <= 0.05 * expected


def test_vector_one_step_increment_covariance():
    # over one explicit Euler step the increment covariance is p tau^(p-1) Sigma dt
    cov = CovMatrix2(4.0, 3.0, 2.0)
    tau0, tau1 = 1.0, 0.99
    n = 40_000
    taus, vals = simulate_vector_reverse_ensemble(
        [0.0, 0.0],
        cov,
        2.0,
        tau0,
        tau1,
        1,
        n,
        seed=3,
        init=np.zeros((n, 2)),
        record_taus=[tau0, tau1],
    )
    inc = vals[:, 1, :] - vals[:, 0, :]
    emp = np.cov(inc.T)
    expected = 2.0 * tau0 * (tau0 - tau1) * cov.matrix()
    assert np.allclose(emp, expected, rtol=0.05, atol=5e-5)


def test_drift_boundedness_sigma_zero():
    rows = drift_boundedness_stat(SdeParams(1.0, 0.0), [1.0, 0.1], 1_000, seed=1)
    assert all(r["q99"] == 0.0 and r["mean_abs"] == 0.0 for r in rows)


def test_drift_boundedness_tau_independent():
    # under the forward marginal, (y-mu)/tau ~ N(0, sigma^2) at p = 2, so
    # |drift| quantiles are flat in tau: q99 = 2 sigma z_0.995 ~ 5.15
    params = SdeParams(mu=0.0, sigma=1.0, exponent_p=2.0)
    rows = drift_boundedness_stat(params, [1.0, 0.1, 0.01], 200_000, seed=11)
    exact_q99 = 2.0 * 1.0 * Z_995
    exact_mean = 2.0 * 1.0 * math.sqrt(2.0 / math.pi)
    for row in rows:
        assert 4.6 <= row["q99"] <= 5.8
        assert abs(row["q99"] - exact_q99) <= 0.1
        assert abs(row["mean_abs"] - exact_mean) <= 0.05 * exact_mean
    means = [r["mean_abs"] for r in rows]
    assert max(means) - min(means) <= 0.05 * exact_mean
