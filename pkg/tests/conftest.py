import numpy as np
import pytest

from frontlab.spectral_grid import PeriodicGrid, RealField, cosine


@pytest.fixture
def unit_grid():
    return PeriodicGrid(2 * np.pi, 16)


@pytest.fixture
def desk_grid():
    return PeriodicGrid(12.0, 128)


def fixture_ic(grid):
    """cos(2 pi eta / ell0) + 0.5 cos(4 pi eta / ell0)."""
    return RealField(grid, cosine(grid, 1).values + cosine(grid, 2, 0.5).values)


def random_band_limited(grid, rng, top=None):
    top = grid.n // 3 if top is None else top
    eta = grid.nodes
    values = np.zeros(grid.n)
    for m in range(0, top + 1):
        a, b = rng.standard_normal(2)
        arg = 2 * np.pi * m * eta / grid.ell0
        values += a * np.cos(arg) + (b * np.sin(arg) if m else 0.0)
    return RealField(grid, values)
