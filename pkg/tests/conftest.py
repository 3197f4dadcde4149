import pytest

from foed_lab.models import make_besq_shift, make_gauss_gauss, make_ou_shift


@pytest.fixture(scope="session")
def gg():
    return make_gauss_gauss(1.0)


@pytest.fixture(scope="session")
def ou():
    return make_ou_shift(1.0, 0.5, 0.0)


@pytest.fixture(scope="session")
def besq():
    return make_besq_shift(1.0, 2.0, 1.0)
