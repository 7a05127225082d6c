import numpy as np
import pytest

from anisowave.spectral_core import make_grid


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32, 16.0)


@pytest.fixture(scope="session")
def grid48():
    return make_grid(48, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def bump_sum(grid, rng, count=3, radius=2.0, widths=(0.8, 1.2), amp=1.0):
    """Seeded superposition of Gaussians supported well inside the box."""
    x1, x2, x3 = grid.x
    out = np.zeros(grid.shape)
    for _ in range(count):
        c = rng.uniform(-radius, radius, size=3)
        w = rng.uniform(*widths)
        a = amp * rng.uniform(0.5, 1.0) * rng.choice((-1.0, 1.0))
        out += a * np.exp(-((x1 - c[0]) ** 2 + (x2 - c[1]) ** 2
                            + (x3 - c[2]) ** 2) / w**2)
    return out


def annulus_field(grid, r0=2.5, w=0.75):
    """(x1/r) exp(-((r-r0)/w)^2): smooth, odd, vanishing at the origin."""
    x1 = grid.x[0]
    r = grid.r  # strictly positive on the offset lattice
    return (x1 / r) * np.exp(-((r - r0) / w) ** 2)
