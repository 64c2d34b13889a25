import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "banditlab", deadline=None, max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "banditlab"))


def random_binary_arms(rng, m, d):
    """min(m, 2^d - 1) distinct nonzero binary arms of dimension d covering every coordinate."""
    m = min(m, 2 ** d - 1)
    while True:
        arms = (rng.random((4 * m, d)) < 0.5).astype(float)
        arms = arms[arms.sum(axis=1) > 0]
        _, first = np.unique(arms, axis=0, return_index=True)
        arms = arms[np.sort(first)][:m]
        if len(arms) == m and arms.max(axis=0).min() > 0:
            return arms


def unique_theta(rng, arms, low=-1.0, high=1.0, margin=1e-3):
    while True:
        th = rng.uniform(low, high, arms.shape[1])
        v = np.sort(arms @ th)
        if len(v) < 2 or v[-1] - v[-2] > margin:
            return th


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
