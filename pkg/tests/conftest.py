import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

logging.getLogger("mkperf").setLevel(logging.WARNING)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_mixed_labels(rng, n):
    """Random +-1 labels guaranteed to contain both classes."""
    while True:
        y = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        if (y == 1).any() and (y == -1).any():
            return y
