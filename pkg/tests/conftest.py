import numpy as np
import pytest

from aimfreq.geometry import default_layout
from aimfreq.sampling import DEFAULT_SUBBANDS, default_uv_grid


@pytest.fixture(scope="session")
def layout():
    return default_layout()


@pytest.fixture(scope="session")
def uv(layout):
    return default_uv_grid(layout, DEFAULT_SUBBANDS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
