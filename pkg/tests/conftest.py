import numpy as np
import pytest

from dilstruct import construct_space


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def euclid2():
    return construct_space("euclidean 2")


@pytest.fixture(scope="session")
def heis():
    return construct_space("heisenberg")


@pytest.fixture(scope="session")
def snowflake_half():
    return construct_space("snowflake 2 0.5")


@pytest.fixture(scope="session")
def twisted_plane():
    return construct_space("nonstandard 1.0")


@pytest.fixture(scope="session")
def sphere():
    return construct_space("sphere")
