import numpy as np
import pytest
from hypothesis import settings

from attsync.presets import vector_set

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def vs():
    """Two vectors e1, e3 with weights 1, 2: A = diag(1, 0, 2)."""
    return vector_set()


def rot(theta, axis):
    from attsync.so3 import rodrigues

    return rodrigues(theta, np.asarray(axis, dtype=float))


E1, E2, E3 = np.eye(3)
