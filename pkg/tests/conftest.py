"""
Shared fixtures: a small array (N=8), pilot block (T=6) and grid (J=16)
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from channel.generator import ChannelSample, PilotMatrix, generate_pilots, make_sample  # noqa: E402
from channel.geometry import ArrayGeometry, Grid  # noqa: E402
from sbl.types import SblHyper  # noqa: E402
from utils.rng import make_rng  # noqa: E402

N_ANTENNAS = 8
PILOT_LENGTH = 6
GRID_SIZE = 16


@pytest.fixture
def geom() -> ArrayGeometry:
    return ArrayGeometry(n_antennas=N_ANTENNAS)


@pytest.fixture
def grid() -> Grid:
    return Grid.uniform(GRID_SIZE)


@pytest.fixture
def pilot(geom) -> PilotMatrix:
    return generate_pilots(PILOT_LENGTH, geom, 1.0, make_rng(0))


@pytest.fixture
def hyper() -> SblHyper:
    return SblHyper(track_evidence=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(1234)


def random_sample(geom: ArrayGeometry, pilot: PilotMatrix, seed: int, snr_db: float = 20.0,
                  n_rays: int = 3) -> ChannelSample:
    return make_sample(geom, pilot, n_rays, snr_db, make_rng(seed))
