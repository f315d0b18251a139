import numpy as np
import pytest

from ngfreg.geometry import Grid3


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid_pair(rng, max_dim=9):
    """Random (def_grid, image_grid) pair covering the same world domain."""
    di = tuple(int(x) for x in rng.integers(1, max_dim + 1, 3))
    dd = tuple(int(rng.integers(1, v + 1)) for v in di)
    h = tuple(float(x) for x in rng.uniform(0.5, 3.0, 3))
    o = tuple(float(x) for x in rng.uniform(-5, 5, 3))
    image_grid = Grid3(di, h, o)
    hd = tuple(n * s / m for n, s, m in zip(di, h, dd))
    od = tuple(oo - s / 2 + sd / 2 for oo, s, sd in zip(o, h, hd))
    return Grid3(dd, hd, od), image_grid
