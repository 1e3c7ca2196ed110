"""Common fixtures for the test suite."""

import numpy as np
import pytest

import support


@pytest.fixture
def ref_model():
    """Fixed 2-D model with hand-computed decision values."""
    return support.reference_model()


@pytest.fixture
def toy_data():
    """Two 1-D points, one per class."""
    return support.toy_dataset()


@pytest.fixture
def rng():
    """Deterministic generator for per-test random data."""
    return np.random.default_rng(12345)
