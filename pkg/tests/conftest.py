import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def gen():
    return np.random.default_rng(20261016)


def interior_points(gen, n, count, floor=1e-3):
    """Random simplex points kept away from the faces."""
    p = gen.dirichlet(np.ones(n), size=count) + floor
    return p / p.sum(axis=1, keepdims=True)
