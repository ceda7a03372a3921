import numpy as np
import pytest

from bifentropy.families import make_unicritical
from bifentropy.geometry import Rect
from bifentropy.measure import build_measure_grid
from bifentropy.orbits import orbit_table

STANDARD_WINDOW = Rect(-2.5, 1.5, -1.5, 1.5)


@pytest.fixture(scope="session")
def fam2():
    return make_unicritical(2)


@pytest.fixture(scope="session")
def grid400(fam2):
    """The acceptance-scale measure grid (shared: ~15 s to build)."""
    return build_measure_grid(fam2, STANDARD_WINDOW, 400)


@pytest.fixture(scope="session")
def grid200(fam2):
    return build_measure_grid(fam2, STANDARD_WINDOW, 200)


@pytest.fixture(scope="session")
def table14(fam2, grid400):
    """Depth-14 orbits of every grid cell center (Bowen-ball queries)."""
    return orbit_table(fam2, grid400.params, 14)
