import numpy as np
import pytest

from f2narx.data import TimeGrid
from f2narx.problems import BoucWenWhiteNoise


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def short_problem():
    """Bouc-Wen with white noise on a 2 s record (501 samples)."""
    return BoucWenWhiteNoise(grid=TimeGrid(0.0, 0.004, 501))


@pytest.fixture(scope="session")
def short_data(short_problem):
    rng = np.random.default_rng(7)
    train = short_problem.generate(*short_problem.sample(rng, 12))
    test = short_problem.generate(*short_problem.sample(rng, 6))
    return train, test


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
