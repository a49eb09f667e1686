import numpy as np
import pytest

from ncldof.verify import make_instance


@pytest.fixture(scope="session")
def inst():
    """N=200, H=5, M=10 on 8-d synthetic data with noise 0.3."""
    return make_instance(200, 5, 10, seed=0)


@pytest.fixture(scope="session")
def small_inst():
    return make_instance(60, 3, 4, d=3, seed=1, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
