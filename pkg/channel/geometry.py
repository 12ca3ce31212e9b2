"""
ULA geometry, angular grid and the off-grid steering dictionary
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utils.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with N elements spaced d/lambda apart"""
    n_antennas: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas must be >= 1, got {self.n_antennas}")
        if not self.spacing_ratio > 0:
            raise ValueError(f"spacing_ratio must be > 0, got {self.spacing_ratio}")

    @property
    def element_index(self) -> np.ndarray:
        return np.arange(self.n_antennas, dtype=float)

    def derivative_operator(self) -> np.ndarray:
        """Diagonal of D with a'(phi) = cos(phi) * D a(phi)"""
        return -2j * np.pi * self.spacing_ratio * self.element_index


@dataclass(frozen=True)
class Grid:
    """
    Fixed angular sampling grid.

    Points sit at the centers of equal cells of [-pi/2, pi/2]. A padded grid
    carries trailing inactive points whose dictionary columns are zero.
    """
    points: np.ndarray
    resolution: float
    active: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        object.__setattr__(self, 'points', points)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(points) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if self.active is not None:
            mask = np.asarray(self.active, dtype=bool)
            if mask.shape != points.shape:
                raise DimensionMismatchError("grid activity mask does not match grid size")
            object.__setattr__(self, 'active', mask)
        live = points[self.active_mask]
        if live.size and (live[0] < -HALF_PI or live[-1] > HALF_PI):
            raise ValueError("active grid points must lie in [-pi/2, pi/2]")

    @classmethod
    def uniform(cls, size: int) -> 'Grid':
        if size < 2:
            raise ValueError(f"grid size must be >= 2, got {size}")
        resolution = np.pi / size
        points = -HALF_PI + resolution * (np.arange(size) + 0.5)
        return cls(points=points, resolution=resolution)

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def active_mask(self) -> np.ndarray:
        if self.active is None:
            return np.ones(self.points.size, dtype=bool)
        return self.active

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active_mask))

    def padded(self, total: int) -> 'Grid':
        """Append inactive points so the grid has `total` columns"""
        if total < self.size:
            raise DimensionMismatchError(f"cannot pad a grid of {self.size} points down to {total}")
        extra = total - self.size
        tail = self.points[-1] + self.resolution * np.arange(1, extra + 1)
        mask = np.concatenate([self.active_mask, np.zeros(extra, dtype=bool)])
        return Grid(points=np.concatenate([self.points, tail]), resolution=self.resolution, active=mask)

    def clip_beta(self, beta: np.ndarray) -> np.ndarray:
        half = self.resolution / 2.0
        return np.clip(beta, -half, half)

    def nearest_index(self, angle: float) -> int:
        live = np.flatnonzero(self.active_mask)
        return int(live[np.argmin(np.abs(self.points[live] - angle))])


def steering_vector(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """a(phi) with element n equal to exp(-j 2 pi (d/lambda) n sin(phi)) / sqrt(N)"""
    phase = -2j * np.pi * geom.spacing_ratio * geom.element_index * np.sin(angle)
    return np.exp(phase) / np.sqrt(geom.n_antennas)


def steering_derivative(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """da(phi)/dphi"""
    return geom.derivative_operator() * np.cos(angle) * steering_vector(geom, angle)


def steering_matrix(geom: ArrayGeometry, angles: np.ndarray) -> np.ndarray:
    """Columns a(angle_j) for every entry of angles"""
    angles = np.asarray(angles, dtype=float)
    phase = -2j * np.pi * geom.spacing_ratio * np.outer(geom.element_index, np.sin(angles))
    return np.exp(phase) / np.sqrt(geom.n_antennas)


def _check_beta(grid: Grid, beta: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (grid.size,):
        raise DimensionMismatchError(f"beta has shape {beta.shape}, grid has {grid.size} points")
    return grid.clip_beta(beta)


def build_dictionary(geom: ArrayGeometry, grid: Grid, beta: np.ndarray) -> np.ndarray:
    """A(beta) = [a(phi_1 + beta_1), ..., a(phi_J + beta_J)]"""
    beta = _check_beta(grid, beta)
    dictionary = steering_matrix(geom, grid.points + beta)
    if grid.active is not None:
        dictionary[:, ~grid.active] = 0.0
    return dictionary


def build_dictionary_derivative(geom: ArrayGeometry, grid: Grid, beta: np.ndarray) -> np.ndarray:
    """Columns a'(phi_j + beta_j)"""
    beta = _check_beta(grid, beta)
    angles = grid.points + beta
    derivative = geom.derivative_operator()[:, None] * np.cos(angles)[None, :] * steering_matrix(geom, angles)
    if grid.active is not None:
        derivative[:, ~grid.active] = 0.0
    return derivative
