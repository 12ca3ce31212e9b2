"""
Posterior moments and log-evidence of the off-grid SBL model
"""

import logging

import numpy as np
from scipy.linalg import cho_solve

from channel.generator import PilotMatrix
from channel.geometry import ArrayGeometry, Grid, build_dictionary
from utils.errors import NumericalBreakdownError
from utils.linalg import hermitian_factor, hermitian_inverse
from .types import Posterior, SblHyper, SblState

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12


def sensing_matrix(pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, beta: np.ndarray) -> np.ndarray:
    """Phi(beta) = X A(beta)"""
    return pilot.x @ build_dictionary(geom, grid, beta)


def residual_energy(phi: np.ndarray, mu: np.ndarray, sigma: np.ndarray, y: np.ndarray) -> float:
    """eta = Tr(Phi Sigma Phi^H) + ||y - Phi mu||^2"""
    trace = np.real(np.sum((phi @ sigma) * phi.conj()))
    residual = y - phi @ mu
    return float(trace + np.real(np.vdot(residual, residual)))


def posterior_from_sensing(phi: np.ndarray, alpha: float, gamma: np.ndarray, y: np.ndarray) -> Posterior:
    precision = alpha * (phi.conj().T @ phi) + np.diag(gamma)
    sigma = hermitian_inverse(precision)
    mu = alpha * (sigma @ (phi.conj().T @ y))
    return Posterior(mu=mu, sigma=sigma, eta=residual_energy(phi, mu, sigma, y))


def posterior_moments(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                      y: np.ndarray) -> Posterior:
    """Sigma = (alpha Phi^H Phi + diag(gamma))^-1, mu = alpha Sigma Phi^H y"""
    phi = sensing_matrix(pilot, grid, geom, state.beta)
    return posterior_from_sensing(phi, state.alpha, state.gamma, y)


def initial_state(y: np.ndarray, grid_size: int) -> SblState:
    """alpha = 1 / var(y), gamma = 1, beta = 0"""
    variance = float(np.var(y)) if y.size else 0.0
    return SblState(
        alpha=1.0 / max(variance, VARIANCE_FLOOR),
        gamma=np.ones(grid_size),
        beta=np.zeros(grid_size),
        iter=0,
    )


def data_log_density(covariance: np.ndarray, y: np.ndarray) -> float:
    """ln CN(y; 0, covariance)"""
    try:
        factor = hermitian_factor(covariance)
    except NumericalBreakdownError as e:
        raise NumericalBreakdownError(f"evidence covariance is not positive definite: {e}") from e
    log_det = 2.0 * np.sum(np.log(np.real(np.diag(factor[0]))))
    quad = np.real(np.vdot(y, cho_solve(factor, y)))
    return float(-y.size * np.log(np.pi) - log_det - quad)


def log_evidence(state: SblState, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry, y: np.ndarray,
                 hyper: SblHyper) -> float:
    """
    ln p(y, alpha, gamma, beta) up to an additive constant.

    y ~ CN(0, C) with C = alpha^-1 I + Phi diag(1/gamma) Phi^H, plus the Gamma
    log-priors a ln x - b x on alpha and every gamma_j.
    """
    phi = sensing_matrix(pilot, grid, geom, state.beta)
    covariance = np.eye(y.size) / state.alpha + (phi / state.gamma) @ phi.conj().T

    prior = hyper.a * np.log(state.alpha) - hyper.b * state.alpha
    prior += np.sum(hyper.a * np.log(state.gamma) - hyper.b * state.gamma)
    return data_log_density(covariance, y) + float(prior)
