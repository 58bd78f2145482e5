"""Shared fixtures: small maps, scans and settings sized for fast tests."""

import numpy as np
import pytest

from src.config import Settings
from src.models.samples import NoiseParams, ScanObservation
from src.models.world import OccupancyGrid, Pose
from src.services.world import build_landmark_room, build_symmetric_map, expected_scan


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def noise() -> NoiseParams:
    return NoiseParams()


@pytest.fixture(scope="session")
def symmetric_map() -> OccupancyGrid:
    """10 m four-room map at 0.1 m cells."""
    return build_symmetric_map(10.0, 2, 1.0, 0.1)


@pytest.fixture(scope="session")
def landmark_map() -> OccupancyGrid:
    return build_landmark_room(10.0, 0.1)


@pytest.fixture(scope="session")
def open_room() -> OccupancyGrid:
    """5 m closed square room."""
    return build_symmetric_map(5.0, 1, 0.0, 0.1)


@pytest.fixture
def bearings() -> np.ndarray:
    return ScanObservation.default_bearings(16)


def make_scan(grid: OccupancyGrid, pose: Pose, bearings: np.ndarray, max_range: float = 10.0):
    """Noise-free scan taken at pose."""
    ranges = expected_scan(grid, pose, bearings, max_range)
    return ScanObservation(bearings=bearings, ranges=ranges, max_range=max_range)


@pytest.fixture
def small_settings() -> Settings:
    """Settings scaled down for quick filter runs on the 10 m maps."""
    return Settings(
        _env_file=None,
        map_side=10.0,
        n_beams=16,
        n_test=4000,
        grid_x=50,
        grid_y=50,
        split_grid=20,
        fixed_n=200,
        n_seeds=2,
        population_cap=2000.0,
    )
