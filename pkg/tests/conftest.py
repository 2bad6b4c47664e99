import numpy as np
import pytest

from cslpose.pipeline import default_camera


def central_difference(f, x, h=1e-6):
    """Independent finite-difference oracle used across the gradient tests."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


@pytest.fixture
def cam():
    return default_camera()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
