import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("suite")


def random_image(seed, channels=3, h=16, w=16, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(channels, h, w))


def cast_image(seed, h=32, w=32):
    """Random pixel image with a deliberate colour cast and value headroom.

    Channel ranges are offset so the opponent-plane statistics sit well
    away from their sqrt kinks, which the gradient diagnostics need.
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.15, 0.85, size=(h, w))
    g = rng.uniform(0.10, 0.70, size=(h, w))
    b = rng.uniform(0.25, 0.95, size=(h, w))
    return np.stack([r, g, b])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
