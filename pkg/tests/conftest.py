import numpy as np
import pytest

from lrisp import fixtures
from lrisp.geometry import Direction
from lrisp.reconstruct import ReconstructionConfig
from lrisp.separation import SeparationOptions
from lrisp.symbol import Energy


@pytest.fixture
def omega_x():
    return Direction([1.0, 0.0, 0.0])


@pytest.fixture
def p1_bare():
    return fixtures.p1("bare")


@pytest.fixture
def p1_cut():
    return fixtures.p1("cutoff")


@pytest.fixture
def p2_bare():
    return fixtures.p2("bare")


@pytest.fixture
def p3_cut():
    return fixtures.p3("cutoff")


@pytest.fixture
def energy():
    return Energy(1.0)


@pytest.fixture
def small_config():
    """Reduced grids for pipeline property tests (structure, not accuracy)."""
    return ReconstructionConfig(
        separation=SeparationOptions(num_radii=48, probe_rays=4),
        n_angles=16,
        n_offsets=257,
        beta_nodes=13,
        coeff_radii=12,
        radii_count=3,
    )


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
