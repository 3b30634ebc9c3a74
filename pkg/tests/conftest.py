import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def unit_circle():
    t = 2 * np.pi * np.arange(256) / 256
    return np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1)
