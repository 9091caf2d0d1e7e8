import os
import sys

BASE_DIR = os.path.dirname(__file__)
sys.path.append(os.path.abspath(os.path.join(BASE_DIR, "..")))  # noqa: E402

import pytest  # noqa: E402

from helpers import tiny_model  # noqa: E402
from pde.problems import get_problem  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale training runs")


@pytest.fixture()
def burgers():
    return get_problem("burgers")


@pytest.fixture()
def heat():
    return get_problem("heat")


@pytest.fixture()
def navier_stokes():
    return get_problem("navier_stokes")


@pytest.fixture()
def burgers_model(burgers):
    return tiny_model(burgers)


@pytest.fixture()
def heat_model(heat):
    return tiny_model(heat)
