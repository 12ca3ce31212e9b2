"""
Off-grid SBL loop and the on-grid baseline

One iteration updates alpha, then gamma, then beta, then reconstructs the
channel on the selected support. Convergence is measured on the posterior-mean
channel A(beta) mu, which moves every iteration even while the support and the
least-squares estimate stay put: the loop stops once ||m_t - m_(t-1)||^2 <= delta
or after max_iters iterations.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from channel.generator import ChannelSample, PilotMatrix
from channel.geometry import ArrayGeometry, Grid, build_dictionary
from utils.errors import NumericalBreakdownError
from .posterior import initial_state, log_evidence, posterior_moments
from .types import IterationRecord, Posterior, SblHyper, SblResult, SblState
from .updates import (
    BetaGradientTerms,
    beta_gradient_terms,
    reconstruct_channel,
    select_support,
    update_alpha,
    update_beta,
    update_gamma,
)

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-300


@dataclass
class IterationOutcome:
    state: SblState
    posterior_alpha: Posterior
    posterior_gamma: Posterior
    posterior_beta: Optional[Posterior]
    gradient: Optional[BetaGradientTerms]
    step: Optional[Union[float, np.ndarray]]


def nmse(h_hat: np.ndarray, h: np.ndarray) -> float:
    """||h_hat - h||^2 / ||h||^2"""
    energy = float(np.vdot(h, h).real)
    error = h_hat - h
    return float(np.vdot(error, error).real) / energy if energy > 0 else float('nan')


def calibrate_beta_step(xi: np.ndarray, grid: Grid, hyper: SblHyper) -> float:
    """Step that moves the steepest gap by beta_step_fraction of the grid spacing"""
    peak = float(np.max(np.abs(xi))) if xi.size else 0.0
    if peak <= 0.0 or not np.isfinite(peak):
        return 0.0
    return hyper.beta_step_fraction * grid.resolution / peak


def curvature_beta_step(terms: BetaGradientTerms) -> np.ndarray:
    """
    Per-gap Gauss-Newton step 1 / (2 |c1_j| ||phi'_j||^2); gaps with no curvature get 0.
    """
    curvature = 2.0 * np.abs(terms.c1) * np.sum(np.abs(terms.phi_derivative) ** 2, axis=0)
    step = np.zeros_like(curvature)
    usable = curvature > CURVATURE_FLOOR
    step[usable] = 1.0 / curvature[usable]
    return step


def select_beta_step(terms: BetaGradientTerms, grid: Grid, hyper: SblHyper) -> Union[float, np.ndarray]:
    if hyper.beta_step_rule == 'fixed':
        return float(hyper.step_beta)
    if hyper.beta_step_rule == 'curvature':
        return curvature_beta_step(terms)
    return calibrate_beta_step(terms.xi, grid, hyper)


def sbl_iteration(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, y: np.ndarray,
                  hyper: SblHyper, step: Optional[Union[float, np.ndarray]] = None, freeze_beta: bool = False) -> IterationOutcome:
    """
    One plain iteration: (alpha, gamma, beta)_t -> (alpha, gamma, beta)_(t+1).

    When step is None it is chosen by select_beta_step.
    """
    posterior_alpha = posterior_moments(state, pilot, grid, geom, y)
    alpha_next = update_alpha(posterior_alpha, hyper, y.size)

    after_alpha = SblState(alpha=alpha_next, gamma=state.gamma, beta=state.beta, iter=state.iter)
    if hyper.recompute_posterior:
        posterior_gamma = posterior_moments(after_alpha, pilot, grid, geom, y)
    else:
        posterior_gamma = posterior_alpha
    gamma_next = update_gamma(posterior_gamma, hyper)

    after_gamma = SblState(alpha=alpha_next, gamma=gamma_next, beta=state.beta, iter=state.iter)
    if freeze_beta:
        return IterationOutcome(
            state=SblState(alpha=alpha_next, gamma=gamma_next, beta=state.beta.copy(), iter=state.iter + 1),
            posterior_alpha=posterior_alpha,
            posterior_gamma=posterior_gamma,
            posterior_beta=None, gradient=None, step=None,
        )

    posterior_beta = posterior_moments(after_gamma, pilot, grid, geom, y)
    terms = beta_gradient_terms(after_gamma, posterior_beta, pilot, grid, geom, y, alpha_next)
    if step is None:
        step = select_beta_step(terms, grid, hyper)
    beta_next = update_beta(after_gamma, terms.xi, step, grid)

    if hyper.beta_step_halving:
        beta_next = _halve_until_ascent(after_gamma, terms.xi, step, pilot, grid, geom, y, hyper, beta_next)

    return IterationOutcome(
        state=SblState(alpha=alpha_next, gamma=gamma_next, beta=beta_next, iter=state.iter + 1),
        posterior_alpha=posterior_alpha,
        posterior_gamma=posterior_gamma,
        posterior_beta=posterior_beta,
        gradient=terms,
        step=step,
    )


def _halve_until_ascent(state: SblState, xi: np.ndarray, step: Union[float, np.ndarray], pilot: PilotMatrix, grid: Grid,
                        geom: ArrayGeometry, y: np.ndarray, hyper: SblHyper, beta_next: np.ndarray) -> np.ndarray:
    baseline = log_evidence(state, pilot, grid, geom, y, hyper)
    for _ in range(hyper.max_halvings + 1):
        trial = SblState(alpha=state.alpha, gamma=state.gamma, beta=beta_next, iter=state.iter)
        if log_evidence(trial, pilot, grid, geom, y, hyper) >= baseline:
            return beta_next
        step = step * 0.5
        beta_next = update_beta(state, xi, step, grid)
    return state.beta.copy()


def _run(sample: ChannelSample, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, hyper: SblHyper,
         freeze_beta: bool) -> SblResult:
    y = sample.y
    state = initial_state(y, grid.size)
    support = select_support(state.gamma, hyper.support_ratio, hyper.gamma_cap, grid.active_mask)
    h_hat = reconstruct_channel(grid, geom, state.beta, support, pilot, y)
    mean_prev: Optional[np.ndarray] = None
    step = None
    trajectory = []

    for t in range(1, hyper.max_iters + 1):
        beta_before = state.beta
        try:
            outcome = sbl_iteration(state, pilot, grid, geom, y, hyper, step=step, freeze_beta=freeze_beta)
        except NumericalBreakdownError as e:
            raise NumericalBreakdownError(str(e), iteration=t) from e
        state = outcome.state
        if hyper.beta_step_rule == 'calibrated':
            step = outcome.step

        support = select_support(state.gamma, hyper.support_ratio, hyper.gamma_cap, grid.active_mask)
        h_hat = reconstruct_channel(grid, geom, state.beta, support, pilot, y)

        # posterior mean of the state this iteration started from
        mean = build_dictionary(geom, grid, beta_before) @ outcome.posterior_alpha.mu
        change = float('inf') if mean_prev is None else float(np.vdot(mean - mean_prev, mean - mean_prev).real)
        evidence = log_evidence(state, pilot, grid, geom, y, hyper) if hyper.track_evidence else float('nan')
        trajectory.append(IterationRecord(alpha=state.alpha, change=change, evidence=evidence))
        logger.debug(f"iteration {t}: alpha={state.alpha:.4e} change={change:.3e} support={support.size}")

        mean_prev = mean
        if change <= hyper.delta:
            break

    return SblResult(
        h_hat=h_hat,
        support=support,
        state=state,
        iters_used=len(trajectory),
        nmse=nmse(h_hat, sample.h),
        trajectory=trajectory,
    )


def run_sbl(sample: ChannelSample, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
            hyper: SblHyper) -> SblResult:
    """Off-grid SBL with alpha -> gamma -> beta -> reconstruct per iteration"""
    return _run(sample, pilot, grid, geom, hyper, freeze_beta=False)


def run_standard_sbl(sample: ChannelSample, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                     hyper: SblHyper) -> SblResult:
    """On-grid SBL: beta frozen at zero"""
    return _run(sample, pilot, grid, geom, hyper, freeze_beta=True)
