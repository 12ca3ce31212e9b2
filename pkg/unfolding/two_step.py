"""
Closed-form (O1, o2) under which one unfolded layer reproduces two alpha iterations

With gamma and beta held fixed, let kappa = (T + a) / (b + eta(alpha_t)) and
R(x) = (x Phi^H Phi + diag(gamma))^-1. Choosing O1 = R(kappa) - R(alpha_l) and
o2 = (kappa - alpha_l) Phi^+ Phi R(kappa) Phi^H y makes the layer's refined
moments equal the posterior at kappa, so its alpha equals alpha_(t+2).
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import pinv

from channel.generator import ChannelSample, PilotMatrix
from channel.geometry import ArrayGeometry, Grid
from sbl.posterior import initial_state, posterior_from_sensing, sensing_matrix
from sbl.types import SblHyper, SblState
from sbl.updates import update_alpha
from .layer import unfolded_layer
from .params import LayerParams

logger = logging.getLogger(__name__)


def two_iteration_alpha(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, y: np.ndarray,
                        hyper: SblHyper) -> Tuple[float, float]:
    """(alpha_(t+1), alpha_(t+2)) from the alpha recursion with gamma and beta fixed"""
    phi = sensing_matrix(pilot, grid, geom, state.beta)
    first = update_alpha(posterior_from_sensing(phi, state.alpha, state.gamma, y), hyper, y.size)
    second = update_alpha(posterior_from_sensing(phi, first, state.gamma, y), hyper, y.size)
    return first, second


def two_iteration_params(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, y: np.ndarray,
                         hyper: SblHyper, alpha_t: float, alpha_l: float) -> Tuple[np.ndarray, np.ndarray]:
    phi = sensing_matrix(pilot, grid, geom, state.beta)
    kappa = update_alpha(posterior_from_sensing(phi, alpha_t, state.gamma, y), hyper, y.size)

    at_kappa = posterior_from_sensing(phi, kappa, state.gamma, y)
    at_layer = posterior_from_sensing(phi, alpha_l, state.gamma, y)
    o1 = at_kappa.sigma - at_layer.sigma
    projector = pinv(phi) @ phi
    o2 = (kappa - alpha_l) * (projector @ (at_kappa.sigma @ (phi.conj().T @ y)))
    return o1, o2


def verify_one_layer_two_iters(sample: ChannelSample, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                               hyper: SblHyper, state: Optional[SblState] = None,
                               alpha_l: Optional[float] = None) -> float:
    """|alpha_one_layer - alpha_two_iters| / |alpha_two_iters|; reported, never asserted"""
    y = sample.y
    if state is None:
        state = initial_state(y, grid.size)
    if alpha_l is None:
        alpha_l = state.alpha

    _, alpha_two = two_iteration_alpha(state, pilot, grid, geom, y, hyper)
    o1, o2 = two_iteration_params(state, pilot, grid, geom, y, hyper, state.alpha, alpha_l)

    params = LayerParams.zeros(geom.n_antennas, pilot.length, grid.size)
    params.a, params.b = hyper.a, hyper.b
    params.o1, params.o2 = o1, o2
    layer_input = SblState(alpha=alpha_l, gamma=state.gamma, beta=state.beta, iter=state.iter)
    alpha_one = unfolded_layer(layer_input, params, pilot, grid, geom, y).alpha

    residual = abs(alpha_one - alpha_two) / abs(alpha_two)
    logger.debug(f"one layer alpha={alpha_one:.12e}, two iterations alpha={alpha_two:.12e}, residual={residual:.3e}")
    return float(residual)
