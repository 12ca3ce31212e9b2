"""
Cluster/ray channel synthesis, pilot design and noisy observation
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from utils.errors import DimensionMismatchError
from utils.rng import complex_normal
from .geometry import HALF_PI, ArrayGeometry, steering_matrix

logger = logging.getLogger(__name__)

DEFAULT_ANGLE_SPREAD = np.deg2rad(2.0)
DEFAULT_CENTER_MARGIN = np.deg2rad(5.0)


@dataclass
class ChannelSample:
    """One channel realization together with its observation"""
    h: np.ndarray
    ray_angles: np.ndarray
    ray_gains: np.ndarray
    n_clusters: int
    rays_per_cluster: int
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    noise_var: float = 0.0
    gain_var: float = 1.0

    @property
    def n_rays(self) -> int:
        return self.n_clusters * self.rays_per_cluster

    @property
    def energy(self) -> float:
        return float(np.vdot(self.h, self.h).real)


@dataclass
class PilotMatrix:
    """Known training block X (T x N) with per-entry power P"""
    x: np.ndarray
    power: float

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex)
        if self.x.ndim != 2:
            raise DimensionMismatchError("pilot matrix must be two-dimensional")

    @property
    def length(self) -> int:
        return int(self.x.shape[0])

    @property
    def n_antennas(self) -> int:
        return int(self.x.shape[1])

    def gram(self) -> np.ndarray:
        return self.x.conj().T @ self.x

    def padded(self, length: int) -> 'PilotMatrix':
        """Zero rows appended up to `length` pilot symbols"""
        if length < self.length:
            raise DimensionMismatchError(f"cannot pad {self.length} pilot symbols down to {length}")
        x = np.zeros((length, self.n_antennas), dtype=complex)
        x[:self.length] = self.x
        return PilotMatrix(x=x, power=self.power)


def snr_to_noise_var(snr_db: float, power: float = 1.0) -> float:
    """SNR = P / sigma^2"""
    return float(power / 10.0 ** (snr_db / 10.0))


def channel_from_rays(geom: ArrayGeometry, ray_angles: np.ndarray, ray_gains: np.ndarray,
                      n_clusters: int = 1, gain_var: float = 1.0) -> ChannelSample:
    ray_angles = np.asarray(ray_angles, dtype=float)
    ray_gains = np.asarray(ray_gains, dtype=complex)
    if ray_angles.shape != ray_gains.shape:
        raise DimensionMismatchError("ray angles and gains must have equal length")
    if ray_angles.size % n_clusters:
        raise ValueError(f"{ray_angles.size} rays cannot be split into {n_clusters} clusters")
    h = steering_matrix(geom, ray_angles) @ ray_gains
    return ChannelSample(
        h=h,
        ray_angles=ray_angles,
        ray_gains=ray_gains,
        n_clusters=n_clusters,
        rays_per_cluster=ray_angles.size // n_clusters,
        gain_var=gain_var,
    )


def generate_channel(geom: ArrayGeometry, n_clusters: int, rays_per_cluster: int, gain_var: float,
                     angle_spread: float, rng: np.random.Generator,
                     margin: float = DEFAULT_CENTER_MARGIN) -> ChannelSample:
    """
    Draw h = sum_ij xi_ij a(phi_ij).

    Cluster centers are uniform on (-pi/2 + margin, pi/2 - margin); rays spread
    uniformly within +-angle_spread of their center and are clipped to the domain.
    """
    if n_clusters < 1 or rays_per_cluster < 1:
        raise ValueError("n_clusters and rays_per_cluster must be >= 1")
    if not gain_var > 0:
        raise ValueError(f"gain_var must be > 0, got {gain_var}")

    centers = rng.uniform(-HALF_PI + margin, HALF_PI - margin, size=n_clusters)
    offsets = rng.uniform(-angle_spread, angle_spread, size=(n_clusters, rays_per_cluster))
    edge = HALF_PI - 1e-6
    angles = np.clip(centers[:, None] + offsets, -edge, edge).ravel()
    gains = complex_normal(rng, angles.size, gain_var)
    return channel_from_rays(geom, angles, gains, n_clusters=n_clusters, gain_var=gain_var)


def generate_pilots(length: int, geom: ArrayGeometry, power: float, rng: np.random.Generator) -> PilotMatrix:
    """I.i.d. complex Gaussian pilots rescaled so that trace(X X^H) = P T N"""
    if length < 1:
        raise ValueError(f"pilot length must be >= 1, got {length}")
    if not power > 0:
        raise ValueError(f"pilot power must be > 0, got {power}")
    x = complex_normal(rng, (length, geom.n_antennas))
    target = power * length * geom.n_antennas
    x *= np.sqrt(target / np.sum(np.abs(x) ** 2))
    return PilotMatrix(x=x, power=power)


def observe(pilot: PilotMatrix, h: np.ndarray, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """y = X h + n"""
    if pilot.n_antennas != h.shape[0]:
        raise DimensionMismatchError(f"pilot has {pilot.n_antennas} columns, channel has {h.shape[0]} entries")
    clean = pilot.x @ h
    if noise_var <= 0:
        return clean
    return clean + complex_normal(rng, clean.shape, noise_var)


def split_rays(n_rays: int, max_clusters: int) -> Tuple[int, int]:
    """(N_c, N_s) with N_c the largest divisor of n_rays not above max_clusters"""
    for n_clusters in range(min(max_clusters, n_rays), 0, -1):
        if n_rays % n_clusters == 0:
            return n_clusters, n_rays // n_clusters
    return 1, n_rays


def make_sample(geom: ArrayGeometry, pilot: PilotMatrix, n_rays: int, snr_db: float, rng: np.random.Generator,
                gain_var: float = 1.0, angle_spread: float = DEFAULT_ANGLE_SPREAD,
                max_clusters: int = 4) -> ChannelSample:
    n_clusters, rays_per_cluster = split_rays(n_rays, max_clusters)
    sample = generate_channel(geom, n_clusters, rays_per_cluster, gain_var, angle_spread, rng)
    noise_var = snr_to_noise_var(snr_db, pilot.power)
    sample.y = observe(pilot, sample.h, noise_var, rng)
    sample.noise_var = noise_var
    return sample


def resample_observation(sample: ChannelSample, pilot: PilotMatrix, snr_db: float,
                         rng: np.random.Generator) -> ChannelSample:
    """Same channel, fresh observation at a different SNR"""
    noise_var = snr_to_noise_var(snr_db, pilot.power)
    return replace(sample, y=observe(pilot, sample.h, noise_var, rng), noise_var=noise_var)


def pad_observation(sample: ChannelSample, length: int) -> ChannelSample:
    """Zero-pad y to `length` pilot symbols"""
    if length < sample.y.size:
        raise DimensionMismatchError(f"cannot pad {sample.y.size} observations down to {length}")
    y = np.zeros(length, dtype=complex)
    y[:sample.y.size] = sample.y
    return replace(sample, y=y)
