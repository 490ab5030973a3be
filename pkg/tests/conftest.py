import numpy as np
import pytest

from riskplan.environments import circle_env, ellipse_env, heart_env


@pytest.fixture(scope="session")
def ellipse():
    return ellipse_env()


@pytest.fixture(scope="session")
def circle():
    return circle_env()


@pytest.fixture(scope="session")
def heart():
    return heart_env()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
