import pytest

from laughlin.expansion import expand_all
from laughlin.renewal import build_model


@pytest.fixture(scope="session")
def tables_p3():
    return expand_all(3, 8)


@pytest.fixture(scope="session")
def tables_p2():
    return expand_all(2, 8)


@pytest.fixture(scope="session")
def tables_p1():
    return expand_all(1, 10)


@pytest.fixture(scope="session")
def model_p3_g1(tables_p3):
    return build_model(3, 8, 1.0, tables=tables_p3)


@pytest.fixture(scope="session")
def model_p2_g1(tables_p2):
    return build_model(2, 8, 1.0, tables=tables_p2)
