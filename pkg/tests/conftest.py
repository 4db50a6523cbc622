import numpy as np
import pytest

from chemotaxis_lab.model import Params, make_grid

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def unit_params():
    return Params(chi=5.0)


@pytest.fixture
def grid101():
    return make_grid(1.0, 101)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
