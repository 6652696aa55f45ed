import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bernoulli_lab.domain import HalfBallGrid, MatrixField

settings.register_profile(
    "lab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def grid32():
    return HalfBallGrid(1.0, 1 / 32)


@pytest.fixture(scope="session")
def grid64():
    return HalfBallGrid(1.0, 1 / 64)


@pytest.fixture(scope="session")
def grid16():
    return HalfBallGrid(1.0, 1 / 16)


@pytest.fixture(scope="session")
def eye32(grid32):
    return MatrixField.identity(grid32)


@pytest.fixture(scope="session")
def eye64(grid64):
    return MatrixField.identity(grid64)


def half_disk_area(R=1.0):
    return 0.5 * np.pi * R * R


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
