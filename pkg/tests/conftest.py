"""Shared fixtures: small seeded synthetic datasets and prepared encoders."""

import numpy as np
import pytest

from trajsim.data import generate_synthetic
from trajsim.geo import Mbr, compute_dataset_stats, normalize

CITY_MBR = Mbr(41.10, 41.24, -8.73, -8.50)


@pytest.fixture(scope="session")
def city_mbr():
    return CITY_MBR


@pytest.fixture(scope="session")
def small_trajectories():
    return generate_synthetic(60, 10, 60, CITY_MBR, seed=3)


@pytest.fixture(scope="session")
def small_normalized(small_trajectories):
    _, params, _ = compute_dataset_stats(small_trajectories)
    return [normalize(t, params) for t in small_trajectories]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
