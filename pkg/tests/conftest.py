import numpy as np
import pytest

from hyperdata.grid import build_grid


@pytest.fixture(scope="session")
def grid64():
    """Reference desk-scale grid, n = 3."""
    return build_grid(3, 1.0, 12.0, 64, 8)


@pytest.fixture(scope="session")
def grid96():
    return build_grid(3, 1.0, 12.0, 96, 8)


@pytest.fixture(scope="session")
def pipeline_grid():
    """Short-domain grid for the deformation pipelines."""
    return build_grid(3, 1.0, 3.5, 128, 8)


@pytest.fixture(scope="session")
def chain_grid():
    """Grid for the perturb -> deform chain."""
    return build_grid(3, 1.0, 3.0, 128, 8)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
