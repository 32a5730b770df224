import numpy as np
import pytest

from hsfuse import kernels
from hsfuse.cube import SpectralCube


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the JIT kernels once so timed tests measure steady state."""
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_cube(rng, bands, width, height, offset=0.0):
    data = rng.standard_normal((bands, width * height)) + offset
    return SpectralCube(bands, width, height, data)
