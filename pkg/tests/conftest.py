import pytest
from mpmath import mpf

from momenta import PrecisionContext


@pytest.fixture(scope="session")
def ctx128():
    return PrecisionContext(bits=128)


@pytest.fixture(scope="session")
def ctx192():
    return PrecisionContext(bits=192)


@pytest.fixture(scope="session")
def ctx256():
    return PrecisionContext(bits=256)


@pytest.fixture(scope="session")
def ctx_quick():
    # loose tails for tests that only need qualitative behavior
    return PrecisionContext(bits=96, eps_tail=mpf(10) ** -10)
