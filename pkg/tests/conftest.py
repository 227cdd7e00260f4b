from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from amalgam.diagram import grid_coordinate_system, random_coordinate_system, two_factor_system

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

SUITE_SEEDS = range(300)


@pytest.fixture(scope="session")
def two_by_two():
    return two_factor_system(2, 2)


@pytest.fixture(scope="session")
def two_by_three():
    return two_factor_system(2, 3)


@pytest.fixture(scope="session")
def small_grid():
    return grid_coordinate_system(1, 2)


@pytest.fixture(scope="session")
def grid():
    return grid_coordinate_system(2, 2)


@pytest.fixture(scope="session")
def suite_systems():
    return [random_coordinate_system(seed).system for seed in SUITE_SEEDS]
