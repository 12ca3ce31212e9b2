"""
Hermitian positive-definite solves with diagonal jitter fallback
"""

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericalBreakdownError

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-12
MAX_JITTER_ATTEMPTS = 6


def hermitian_factor(matrix: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Cholesky-factorize a Hermitian PD matrix.

    On failure a diagonal jitter of 1e-12 * trace / n is added and grown
    tenfold per attempt. Raises NumericalBreakdownError when every attempt fails.
    """
    n = matrix.shape[0]
    hermitian = 0.5 * (matrix + matrix.conj().T)
    try:
        return cho_factor(hermitian, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        pass

    scale = abs(np.real(np.trace(hermitian))) / max(n, 1)
    if not np.isfinite(scale) or scale == 0.0:
        scale = 1.0
    jitter = JITTER_SCALE * scale
    for attempt in range(MAX_JITTER_ATTEMPTS):
        try:
            factor = cho_factor(hermitian + jitter * np.eye(n), lower=True, check_finite=True)
            logger.debug(f"Hermitian factorization needed jitter {jitter:.3e} (attempt {attempt + 1})")
            return factor
        except (LinAlgError, ValueError):
            jitter *= 10.0

    raise NumericalBreakdownError(f"Hermitian factorization failed for a {n}x{n} system after jitter")


def hermitian_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve matrix @ x = rhs for Hermitian PD matrix"""
    return cho_solve(hermitian_factor(matrix), rhs)


def hermitian_inverse(matrix: np.ndarray) -> np.ndarray:
    inverse = hermitian_solve(matrix, np.eye(matrix.shape[0], dtype=complex))
    return 0.5 * (inverse + inverse.conj().T)
