import numpy as np
import pytest

from bellbound.bell import (
    COUNTEREXAMPLE_SCENARIO,
    behavior,
    build_analytic_measurements,
    build_functional_I,
)
from bellbound.states import build_counterexample_state


@pytest.fixture(scope="session")
def state():
    return build_counterexample_state()


@pytest.fixture(scope="session")
def functional():
    return build_functional_I()


@pytest.fixture(scope="session")
def measurements():
    return build_analytic_measurements()


@pytest.fixture(scope="session")
def realized_behavior(state, measurements):
    ma, mb = measurements
    return behavior(state, ma, mb, COUNTEREXAMPLE_SCENARIO)


@pytest.fixture()
def rng():
    return np.random.default_rng(20140401)
