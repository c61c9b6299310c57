import pytest

from crowdout.model import baseline_scenario, make_uniform_grid


@pytest.fixture
def baseline():
    return baseline_scenario()


@pytest.fixture
def grid():
    return make_uniform_grid(10.0, 1025)
