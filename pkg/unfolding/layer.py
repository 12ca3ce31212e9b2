"""
The unfolded SBL layer and its plain-iteration parameterization
"""

import logging
from typing import Optional, Tuple

import numpy as np

from channel.generator import PilotMatrix
from channel.geometry import ArrayGeometry, Grid, build_dictionary
from sbl.posterior import posterior_from_sensing, residual_energy
from sbl.solver import sbl_iteration
from sbl.types import ALPHA_FLOOR, GAMMA_FLOOR, PRECISION_CAP, SblHyper, SblState
from .params import LayerParams

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-12
# coefficients below this are treated as zero when folding c2 into c1
COUPLING_TOLERANCE = 1e-300


def layer_pilot(pilot: PilotMatrix, params: LayerParams) -> np.ndarray:
    if params.x_delta is None:
        return pilot.x
    return pilot.x + params.x_delta


def refined_moments(phi: np.ndarray, alpha: float, gamma: np.ndarray, y: np.ndarray, o1: np.ndarray,
                    o2: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Sigma~ = Sigma + O1, mu~ = alpha Sigma~ Phi^H y + o2, and eta at (mu~, Sigma~)"""
    base = posterior_from_sensing(phi, alpha, gamma, y)
    sigma = base.sigma + o1
    mu = alpha * (sigma @ (phi.conj().T @ y)) + o2
    return mu, sigma, residual_energy(phi, mu, sigma, y)


def unfolded_alpha(phi: np.ndarray, state: SblState, params: LayerParams, y: np.ndarray) -> float:
    _, _, eta = refined_moments(phi, state.alpha, state.gamma, y, params.o1, params.o2)
    alpha = (y.size + params.a) / max(params.b + eta, DENOMINATOR_FLOOR)
    return float(np.clip(alpha, ALPHA_FLOOR, PRECISION_CAP))


def unfolded_layer(state: SblState, params: LayerParams, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                   y: np.ndarray) -> SblState:
    """
    One layer: alpha and gamma through the refined moments, beta through
    (W1 a_j + b1) and (W2 y + X A(beta) b2 + b3).

    Outputs are clamped to alpha, gamma in [1e-12, 1e12] and |beta| <= r/2.
    """
    x = layer_pilot(pilot, params)
    dictionary = build_dictionary(geom, grid, state.beta)
    phi = x @ dictionary

    alpha_next = unfolded_alpha(phi, state, params, y)

    mu, sigma, _ = refined_moments(phi, alpha_next, state.gamma, y, params.o1, params.o2)
    second_moment = np.real(np.diag(sigma) + np.abs(mu) ** 2)
    gamma_next = (params.a + 1.0) / np.maximum(params.b + second_moment, DENOMINATOR_FLOOR)
    gamma_next = np.clip(gamma_next, GAMMA_FLOOR, PRECISION_CAP)

    steered = x @ (params.w1 @ dictionary + params.b1[:, None])
    coupling = np.real(np.sum(steered.conj() * phi, axis=0))
    drive = params.w2 @ y + phi @ params.b2 + params.b3
    direction = coupling * params.c1 + np.real(steered.conj().T @ drive)
    beta_next = grid.clip_beta(state.beta + params.step_beta * direction)
    if grid.active is not None:
        beta_next[~grid.active] = 0.0

    return SblState(alpha=alpha_next, gamma=gamma_next, beta=beta_next, iter=state.iter + 1)


def plain_equivalent_params(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, y: np.ndarray,
                            hyper: SblHyper, step: Optional[float] = None) -> Tuple[LayerParams, Optional[float]]:
    """
    LayerParams under which unfolded_layer reproduces one plain iteration.

    W1 = diag(-j 2 pi (d/lambda) n) maps a_j to a'_j / cos(phi_j + beta_j), so the
    cosine moves into step_beta. One shared drive vector cannot carry the per-column
    c2_j, so its contribution is folded into c1_j through the first-term coupling.
    Returns the parameters and the scalar beta step to carry into the next layer,
    or None when the step is recomputed every iteration.
    """
    n, t, j = geom.n_antennas, pilot.length, grid.size
    outcome = sbl_iteration(state, pilot, grid, geom, y, hyper, step=step)
    terms = outcome.gradient

    operator = geom.derivative_operator()
    dictionary = build_dictionary(geom, grid, state.beta)
    steered = pilot.x @ (operator[:, None] * dictionary)
    coupling = np.real(np.sum(steered.conj() * terms.phi, axis=0))
    drive = np.real(np.sum(steered.conj() * terms.c2, axis=0))

    c1 = terms.c1.copy()
    usable = np.abs(coupling) > COUPLING_TOLERANCE
    c1[usable] += drive[usable] / coupling[usable]
    if np.any(~usable & grid.active_mask):
        logger.debug(f"{int(np.count_nonzero(~usable & grid.active_mask))} columns have no first-term coupling")

    params = LayerParams.zeros(n, t, j)
    params.a = hyper.a
    params.b = hyper.b
    params.c1 = c1
    params.step_beta = 2.0 * outcome.step * np.cos(grid.points + state.beta)
    params.w1 = np.diag(operator)
    carried = float(outcome.step) if np.ndim(outcome.step) == 0 else None
    return params, carried
