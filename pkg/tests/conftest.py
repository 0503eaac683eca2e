import numpy as np
import pytest

from jcncsim.protocode import bundled_code_path, lift, load_protograph


@pytest.fixture(scope="session")
def ar3a():
    return load_protograph(bundled_code_path())


@pytest.fixture(scope="session")
def desk_code(ar3a):
    """Shortened code (n = 1100) shared by the whole suite."""
    return lift(ar3a, 100, seed=1)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
