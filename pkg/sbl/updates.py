"""
Block updates of the off-grid SBL iteration: alpha, gamma, beta, support and reconstruction
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import lstsq

from channel.generator import PilotMatrix
from channel.geometry import ArrayGeometry, Grid, build_dictionary, build_dictionary_derivative
from utils.errors import EmptySupportError, NumericalBreakdownError
from .posterior import residual_energy, sensing_matrix
from .types import Posterior, SblHyper, SblState

logger = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-12


@dataclass
class BetaGradientTerms:
    """
    Pieces of the beta derivative.

    xi_j = 2 Re{phi'_j^H phi_j} c1_j + 2 Re{phi'_j^H c2_j} with phi_j = X a_j,
    phi'_j = X a'_j, c1_j = -alpha (Sigma_jj + |mu_j|^2) and
    c2_j = alpha (conj(mu_j) y_-j - sum_(i != j) Sigma_ij phi_i).
    """
    xi: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    phi: np.ndarray
    phi_derivative: np.ndarray


def update_alpha(posterior: Posterior, hyper: SblHyper, t: int) -> float:
    """alpha = (T + a) / (b + eta)"""
    denominator = hyper.b + posterior.eta
    if denominator <= 0.0:
        raise NumericalBreakdownError("b + eta = 0: noiseless exact fit leaves alpha unbounded")
    return float((t + hyper.a) / denominator)


def second_moment_diagonal(posterior: Posterior) -> np.ndarray:
    """diag(Sigma + mu mu^H), asserted real"""
    diagonal = np.diag(posterior.sigma) + np.abs(posterior.mu) ** 2
    scale = max(float(np.max(np.abs(diagonal))), 1.0)
    residue = float(np.max(np.abs(np.imag(diagonal)))) if diagonal.size else 0.0
    if residue > IMAG_TOLERANCE * scale:
        raise NumericalBreakdownError(f"posterior second moment has imaginary diagonal residue {residue:.3e}")
    return np.real(diagonal)


def update_gamma(posterior: Posterior, hyper: SblHyper) -> np.ndarray:
    """gamma_j = (a + 1) / (b + Lambda_jj), capped at hyper.gamma_cap"""
    second_moment = second_moment_diagonal(posterior)
    with np.errstate(divide='ignore'):
        gamma = (hyper.a + 1.0) / (hyper.b + second_moment)
    capped = gamma >= hyper.gamma_cap
    if np.any(capped):
        logger.debug(f"{int(np.count_nonzero(capped))} precisions reached the cap")
    return np.minimum(gamma, hyper.gamma_cap)


def beta_gradient_terms(state: SblState, posterior: Posterior, pilot: PilotMatrix, grid: Grid,
                        geom: ArrayGeometry, y: np.ndarray, alpha_next: float) -> BetaGradientTerms:
    phi = pilot.x @ build_dictionary(geom, grid, state.beta)
    phi_derivative = pilot.x @ build_dictionary_derivative(geom, grid, state.beta)
    mu, sigma = posterior.mu, posterior.sigma
    sigma_diag = np.real(np.diag(sigma))

    c1 = -alpha_next * (sigma_diag + np.abs(mu) ** 2)

    # y_-j = y - sum_(i != j) mu_i phi_i for every j, one column each
    residual = y - phi @ mu
    y_minus = residual[:, None] + phi * mu[None, :]
    cross = phi @ sigma - phi * sigma_diag[None, :]
    c2 = alpha_next * (y_minus * mu.conj()[None, :] - cross)

    first = 2.0 * np.real(np.sum(phi_derivative.conj() * phi, axis=0)) * c1
    second = 2.0 * np.real(np.sum(phi_derivative.conj() * c2, axis=0))
    return BetaGradientTerms(xi=first + second, c1=c1, c2=c2, phi=phi, phi_derivative=phi_derivative)


def beta_gradient(state: SblState, posterior: Posterior, pilot: PilotMatrix, grid: Grid, geom: ArrayGeometry,
                  y: np.ndarray, alpha_next: float) -> np.ndarray:
    """Derivative of -alpha (||y - Phi mu||^2 + Tr(Phi Sigma Phi^H)) with respect to beta"""
    return beta_gradient_terms(state, posterior, pilot, grid, geom, y, alpha_next).xi


def beta_surrogate(beta: np.ndarray, posterior: Posterior, alpha: float, pilot: PilotMatrix, grid: Grid,
                   geom: ArrayGeometry, y: np.ndarray) -> float:
    """The beta-dependent part of the surrogate, with alpha, mu and Sigma held fixed"""
    phi = sensing_matrix(pilot, grid, geom, beta)
    return -alpha * residual_energy(phi, posterior.mu, posterior.sigma, y)


def update_beta(state: SblState, xi: np.ndarray, step: Union[float, np.ndarray], grid: Grid) -> np.ndarray:
    """beta + step * xi, clipped to half the grid spacing"""
    return grid.clip_beta(state.beta + step * xi)


def select_support(gamma: np.ndarray, threshold_ratio: float, gamma_cap: Optional[float] = None,
                   active: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Indices whose prior variance 1/gamma_j is at least threshold_ratio times the largest.

    Entries at the precision cap and inactive grid columns are excluded; the
    result is never empty.
    """
    gamma = np.asarray(gamma, dtype=float)
    candidates = np.ones(gamma.size, dtype=bool) if active is None else np.asarray(active, dtype=bool).copy()
    if gamma_cap is not None:
        uncapped = candidates & (gamma < gamma_cap)
        if np.any(uncapped):
            candidates = uncapped
    if not np.any(candidates):
        candidates = np.ones(gamma.size, dtype=bool)

    variance = 1.0 / gamma
    peak = np.max(variance[candidates])
    return np.flatnonzero(candidates & (variance >= threshold_ratio * peak))


def reconstruct_channel(grid: Grid, geom: ArrayGeometry, beta: np.ndarray, support: np.ndarray,
                        pilot: PilotMatrix, y: np.ndarray) -> np.ndarray:
    """h = A_Omega (Phi_Omega)^+ y, minimum-norm least squares"""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise EmptySupportError("cannot reconstruct a channel from an empty support")
    atoms = build_dictionary(geom, grid, beta)[:, support]
    weights, _, _, _ = lstsq(pilot.x @ atoms, y)
    return atoms @ weights
