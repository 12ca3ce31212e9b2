from dataclasses import replace

import numpy as np
import pytest

from channel.generator import PilotMatrix, channel_from_rays, generate_pilots, observe
from channel.geometry import ArrayGeometry, Grid
from conftest import random_sample
from sbl.posterior import (
    initial_state,
    log_evidence,
    posterior_from_sensing,
    posterior_moments,
    sensing_matrix,
)
from sbl.solver import nmse, run_sbl, run_standard_sbl, sbl_iteration
from sbl.types import Posterior, SblHyper, SblState
from sbl.updates import (
    beta_gradient,
    beta_gradient_terms,
    beta_surrogate,
    reconstruct_channel,
    select_support,
    update_alpha,
    update_beta,
    update_gamma,
)
from utils.errors import EmptySupportError, NumericalBreakdownError
from utils.rng import make_rng


def _random_state(rng, grid_size, half):
    return SblState(
        alpha=float(rng.uniform(5.0, 50.0)),
        gamma=rng.uniform(0.2, 5.0, size=grid_size),
        beta=rng.uniform(-0.5, 0.5, size=grid_size) * half,
    )


# posterior

def test_scalar_posterior_matches_closed_form():
    phi = np.array([[0.6 - 0.8j]])
    y = np.array([1.5 + 0.5j])
    posterior = posterior_from_sensing(phi, alpha=2.0, gamma=np.array([3.0]), y=y)
    sigma = 1.0 / (2.0 * abs(phi[0, 0]) ** 2 + 3.0)
    assert posterior.sigma[0, 0].real == pytest.approx(sigma, rel=1e-12)
    assert posterior.mu[0] == pytest.approx(2.0 * sigma * np.conj(phi[0, 0]) * y[0], rel=1e-12)


def test_posterior_covariance_matches_dense_inverse():
    rng = make_rng(7)
    phi = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
    y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    gamma = rng.uniform(0.5, 2.0, size=4)
    posterior = posterior_from_sensing(phi, 3.0, gamma, y)
    dense = np.linalg.inv(3.0 * phi.conj().T @ phi + np.diag(gamma))
    assert np.linalg.norm(posterior.sigma - dense) <= 1e-10 * np.linalg.norm(dense)
    np.testing.assert_allclose(posterior.mu, 3.0 * dense @ phi.conj().T @ y, rtol=1e-10)
    assert np.min(np.linalg.eigvalsh(posterior.sigma)) > 0


def test_huge_precisions_shrink_the_mean(pilot, grid, geom):
    y = make_rng(0).standard_normal(pilot.length) + 0j
    state = SblState(alpha=1.0, gamma=np.full(grid.size, 1e12), beta=np.zeros(grid.size))
    posterior = posterior_moments(state, pilot, grid, geom, y)
    assert np.linalg.norm(posterior.mu) < 1e-6 * np.linalg.norm(y)


def test_initial_state():
    y = np.array([1.0, -1.0, 1.0, -1.0], dtype=complex)
    state = initial_state(y, 5)
    assert state.alpha == pytest.approx(1.0)
    np.testing.assert_array_equal(state.gamma, np.ones(5))
    np.testing.assert_array_equal(state.beta, np.zeros(5))


# alpha / gamma

def _posterior(eta, mu=(), sigma=()):
    return Posterior(mu=np.asarray(mu, dtype=complex), sigma=np.asarray(sigma, dtype=complex), eta=eta)


def test_alpha_update_arithmetic():
    assert update_alpha(_posterior(3.0), SblHyper(a=0.0, b=1.0), 4) == pytest.approx(1.0)
    assert update_alpha(_posterior(0.0), SblHyper(a=0.0, b=1.0), 10) == pytest.approx(10.0)


def test_alpha_decreases_with_eta():
    hyper = SblHyper()
    rng = make_rng(1)
    for low, high in np.sort(rng.uniform(0.01, 10.0, size=(20, 2)), axis=1):
        assert update_alpha(_posterior(high), hyper, 6) < update_alpha(_posterior(low), hyper, 6)


def test_alpha_update_rejects_degenerate_fit():
    with pytest.raises(NumericalBreakdownError):
        update_alpha(_posterior(0.0), SblHyper(a=0.0, b=0.0), 4)


def test_gamma_update_arithmetic():
    posterior = _posterior(0.0, mu=[0.0, 0.5], sigma=np.diag([0.5, 0.25]))
    gamma = update_gamma(posterior, SblHyper(a=0.0, b=0.0))
    np.testing.assert_allclose(gamma, [2.0, 2.0])


def test_gamma_update_is_capped():
    posterior = _posterior(0.0, mu=[0.0], sigma=[[0.0]])
    assert update_gamma(posterior, SblHyper(a=0.0, b=0.0, gamma_cap=1e12))[0] == 1e12


# beta

def test_beta_gradient_matches_finite_differences(pilot, grid, geom):
    rng = make_rng(11)
    half = grid.resolution / 2
    step = 1e-6
    for case in range(50):
        sample = random_sample(geom, pilot, 100 + case)
        state = _random_state(rng, grid.size, half)
        posterior = posterior_moments(state, pilot, grid, geom, sample.y)
        alpha = state.alpha
        analytic = beta_gradient(state, posterior, pilot, grid, geom, sample.y, alpha)

        numeric = np.zeros(grid.size)
        for j in range(grid.size):
            up, down = state.beta.copy(), state.beta.copy()
            up[j] += step
            down[j] -= step
            numeric[j] = (beta_surrogate(up, posterior, alpha, pilot, grid, geom, sample.y)
                          - beta_surrogate(down, posterior, alpha, pilot, grid, geom, sample.y)) / (2 * step)
        assert np.linalg.norm(analytic - numeric) <= 1e-4 * np.linalg.norm(analytic)


def test_second_gradient_term_vanishes_without_coupling(pilot, grid, geom):
    y = make_rng(3).standard_normal(pilot.length) + 0j
    state = SblState(alpha=2.0, gamma=np.ones(grid.size), beta=np.zeros(grid.size))
    posterior = Posterior(mu=np.zeros(grid.size, dtype=complex), sigma=np.diag(np.full(grid.size, 0.5)) + 0j, eta=1.0)
    terms = beta_gradient_terms(state, posterior, pilot, grid, geom, y, 2.0)
    np.testing.assert_allclose(terms.c2, 0.0)


def test_beta_update_steps_and_clips():
    grid = Grid(points=np.array([-0.01, 0.01]), resolution=0.02)
    state = SblState(alpha=1.0, gamma=np.ones(2), beta=np.zeros(2))
    np.testing.assert_allclose(update_beta(state, np.array([10.0, -0.001]), 1.0, grid), [0.01, -0.001])
    np.testing.assert_array_equal(update_beta(state, np.array([3.0, 3.0]), 0.0, grid), [0.0, 0.0])
    np.testing.assert_array_equal(update_beta(state, np.zeros(2), 1.0, grid), [0.0, 0.0])


# support / reconstruction

def test_support_selection():
    np.testing.assert_array_equal(select_support(np.array([1.0, 1e6, 1e6]), 0.01), [0])
    np.testing.assert_array_equal(select_support(np.full(4, 3.0), 0.01), [0, 1, 2, 3])
    np.testing.assert_array_equal(select_support(np.array([1.0, 50.0, 1e9]), 0.0), [0, 1, 2])


def test_support_excludes_capped_and_inactive_columns():
    gamma = np.array([1e12, 2.0, 1.0, 1.0])
    np.testing.assert_array_equal(select_support(gamma, 0.0, gamma_cap=1e12), [1, 2, 3])
    active = np.array([True, True, True, False])
    np.testing.assert_array_equal(select_support(gamma, 0.0, gamma_cap=1e12, active=active), [1, 2])
    assert select_support(np.full(3, 1e12), 0.01, gamma_cap=1e12).size == 3


def test_exact_recovery_on_the_true_support(pilot, grid, geom):
    k = 5
    sample = channel_from_rays(geom, [grid.points[k]], [0.8 - 0.3j])
    y = observe(pilot, sample.h, 0.0, make_rng(0))
    h_hat = reconstruct_channel(grid, geom, np.zeros(grid.size), np.array([k]), pilot, y)
    assert np.linalg.norm(h_hat - sample.h) < 1e-10 * np.linalg.norm(sample.h)


def test_reconstruction_edge_cases(pilot, grid, geom):
    with pytest.raises(EmptySupportError):
        reconstruct_channel(grid, geom, np.zeros(grid.size), np.array([], dtype=int), pilot, np.ones(pilot.length))
    zero = reconstruct_channel(grid, geom, np.zeros(grid.size), np.array([1, 2]), pilot, np.zeros(pilot.length))
    np.testing.assert_array_equal(zero, 0)


# evidence

def test_scalar_evidence_matches_gaussian_density():
    geom = ArrayGeometry(n_antennas=1)
    grid = Grid(points=np.array([-0.5, 0.5]), resolution=1.0, active=np.array([True, False]))
    pilot = PilotMatrix(x=np.array([[1.0 + 0j]]), power=1.0)
    y = np.array([0.7 - 0.2j])
    hyper = SblHyper(a=0.0, b=0.0)
    state = SblState(alpha=2.0, gamma=np.array([4.0, 1.0]), beta=np.zeros(2))
    variance = 1 / 2.0 + 1 / 4.0
    expected = -np.log(np.pi * variance) - abs(y[0]) ** 2 / variance
    assert log_evidence(state, pilot, grid, geom, y, hyper) == pytest.approx(expected, rel=1e-12)


def test_evidence_is_invariant_to_joint_column_permutation(pilot, geom):
    rng = make_rng(4)
    grid = Grid.uniform(16)
    y = rng.standard_normal(pilot.length) + 1j * rng.standard_normal(pilot.length)
    gamma = rng.uniform(0.5, 3.0, size=16)
    beta = rng.uniform(-0.05, 0.05, size=16)
    hyper = SblHyper()
    base = log_evidence(SblState(alpha=3.0, gamma=gamma, beta=beta), pilot, grid, geom, y, hyper)

    order = rng.permutation(16)
    phi = sensing_matrix(pilot, grid, geom, beta)[:, order]
    covariance = np.eye(pilot.length) / 3.0 + (phi / gamma[order]) @ phi.conj().T
    sign, logdet = np.linalg.slogdet(covariance)
    quad = np.real(np.vdot(y, np.linalg.solve(covariance, y)))
    prior = hyper.a * np.log(3.0) - hyper.b * 3.0 + np.sum(hyper.a * np.log(gamma) - hyper.b * gamma)
    permuted = -pilot.length * np.log(np.pi) - logdet - quad + prior
    assert sign.real > 0
    assert base == pytest.approx(permuted, rel=1e-10)


def test_alpha_and_gamma_updates_never_decrease_the_evidence(pilot, grid, geom):
    hyper = SblHyper()
    for run in range(50):
        sample = random_sample(geom, pilot, 500 + run, snr_db=15.0)
        y = sample.y
        state = initial_state(y, grid.size)
        for _ in range(30):
            outcome = sbl_iteration(state, pilot, grid, geom, y, hyper)
            after_alpha = SblState(alpha=outcome.state.alpha, gamma=state.gamma, beta=state.beta)
            after_gamma = SblState(alpha=outcome.state.alpha, gamma=outcome.state.gamma, beta=state.beta)
            values = [log_evidence(s, pilot, grid, geom, y, hyper) for s in (state, after_alpha, after_gamma)]
            tolerance = 1e-8 * max(1.0, abs(values[0]))
            assert values[1] >= values[0] - tolerance
            assert values[2] >= values[1] - tolerance
            state = outcome.state


def test_halving_keeps_beta_steps_ascending(pilot, grid, geom):
    hyper = SblHyper(beta_step_halving=True)
    sample = random_sample(geom, pilot, 77)
    state = initial_state(sample.y, grid.size)
    for _ in range(10):
        outcome = sbl_iteration(state, pilot, grid, geom, sample.y, hyper)
        before = SblState(alpha=outcome.state.alpha, gamma=outcome.state.gamma, beta=state.beta)
        assert (log_evidence(outcome.state, pilot, grid, geom, sample.y, hyper)
                >= log_evidence(before, pilot, grid, geom, sample.y, hyper) - 1e-9)
        state = outcome.state


# full loop

def test_noiseless_on_grid_ray_is_recovered(geom, grid):
    pilot = generate_pilots(8, geom, 1.0, make_rng(8))
    hyper = SblHyper(max_iters=50, delta=1e-14, beta_step_rule='curvature', track_evidence=False)
    rng = make_rng(21)
    for _ in range(100):
        k = int(rng.integers(2, grid.size - 2))
        sample = channel_from_rays(geom, [grid.points[k]], [np.exp(1j * rng.uniform(0, 2 * np.pi))])
        sample.y = observe(pilot, sample.h, 0.0, rng)
        standard = run_standard_sbl(sample, pilot, grid, geom, hyper)
        off_grid = run_sbl(sample, pilot, grid, geom, hyper)
        assert standard.nmse < 1e-6
        assert off_grid.nmse < 1e-6
        assert np.linalg.norm(standard.h_hat - off_grid.h_hat) < 2e-3 * np.linalg.norm(sample.h)


def test_infinite_delta_runs_one_iteration(pilot, grid, geom):
    sample = random_sample(geom, pilot, 3)
    result = run_sbl(sample, pilot, grid, geom, SblHyper(delta=float('inf')))
    assert result.iters_used == 1
    assert len(result.trajectory) == 1


def test_run_is_deterministic_and_bounded(pilot, grid, geom):
    sample = random_sample(geom, pilot, 4)
    hyper = SblHyper(max_iters=20, track_evidence=False)
    first = run_sbl(sample, pilot, grid, geom, hyper)
    second = run_sbl(sample, pilot, grid, geom, hyper)
    np.testing.assert_array_equal(first.h_hat, second.h_hat)
    assert first.iters_used <= 20
    assert first.state.alpha > 0 and np.all(first.state.gamma > 0)
    assert np.all(np.abs(first.state.beta) <= grid.resolution / 2 + 1e-15)
    assert first.nmse == pytest.approx(nmse(first.h_hat, sample.h))


def test_standard_sbl_keeps_beta_at_zero(pilot, grid, geom):
    result = run_standard_sbl(random_sample(geom, pilot, 5), pilot, grid, geom, SblHyper(max_iters=10))
    np.testing.assert_array_equal(result.state.beta, 0)


def test_standard_sbl_keeps_iterating_after_the_support_settles(pilot, grid, geom):
    hyper = SblHyper(track_evidence=False)
    single = SblHyper(max_iters=1, track_evidence=False)
    converged, first = [], []
    for seed in range(10):
        sample = random_sample(geom, pilot, 700 + seed)
        result = run_standard_sbl(sample, pilot, grid, geom, hyper)
        assert result.iters_used > 1
        assert result.trajectory[-1].change <= hyper.delta or result.iters_used == hyper.max_iters
        converged.append(result.nmse)
        first.append(run_standard_sbl(sample, pilot, grid, geom, single).nmse)
    assert np.mean(converged) < np.mean(first)


def test_first_iteration_never_reports_convergence(pilot, grid, geom):
    result = run_sbl(random_sample(geom, pilot, 6), pilot, grid, geom, SblHyper(max_iters=3, track_evidence=False))
    assert result.trajectory[0].change == float('inf')
    assert all(np.isfinite(record.change) for record in result.trajectory[1:])


def test_posterior_covariance_stays_positive_definite(pilot, grid, geom):
    for variant in (SblHyper(track_evidence=False), SblHyper(beta_step_rule='curvature', track_evidence=False)):
        for seed in range(5):
            sample = random_sample(geom, pilot, 800 + seed, snr_db=10.0 + 5 * seed)
            state = initial_state(sample.y, grid.size)
            for _ in range(40):
                outcome = sbl_iteration(state, pilot, grid, geom, sample.y, variant)
                sigma = outcome.posterior_alpha.sigma
                np.testing.assert_allclose(sigma, sigma.conj().T, atol=1e-12 * np.max(np.abs(sigma)))
                assert np.min(np.linalg.eigvalsh(sigma)) > 0
                state = outcome.state
                assert state.alpha > 0 and np.all(state.gamma > 0)


def test_support_is_invariant_to_joint_scaling(pilot, grid, geom):
    scaled_pilot = PilotMatrix(x=2.0 * pilot.x, power=4.0 * pilot.power)
    hyper = SblHyper(max_iters=30, track_evidence=False)
    for seed in range(20):
        sample = random_sample(geom, pilot, 900 + seed)
        scaled = replace(sample, y=2.0 * sample.y)
        base = run_sbl(sample, pilot, grid, geom, hyper)
        twice = run_sbl(scaled, scaled_pilot, grid, geom, hyper)
        np.testing.assert_array_equal(base.support, twice.support)


def test_off_grid_beats_standard_sbl_on_paired_samples(pilot, grid, geom):
    hyper = SblHyper(max_iters=200, beta_step_rule='curvature', track_evidence=False)
    wins = 0
    for seed in range(100):
        sample = random_sample(geom, pilot, 1000 + seed, snr_db=20.0)
        wins += run_sbl(sample, pilot, grid, geom, hyper).nmse < run_standard_sbl(sample, pilot, grid, geom, hyper).nmse
    assert wins >= 80
