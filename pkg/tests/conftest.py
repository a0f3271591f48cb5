import numpy as np
import pytest

from stochdice.model import build_exogenous_paths
from stochdice.params import ModelParams
from stochdice.reference import solve_deterministic

# lines collected by the acceptance module, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def paths(params):
    return build_exogenous_paths(params)


@pytest.fixture(scope="session")
def ref(params):
    return solve_deterministic(params)


@pytest.fixture(scope="session")
def small():
    """Ten-period truncation with its reference, for cheap dynamic programs."""
    p = ModelParams(N=10)
    return p, build_exogenous_paths(p), solve_deterministic(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
