import numpy as np
import pytest

from kgt.problems import NoiseModel, make_quadratic


@pytest.fixture
def hetero_problem():
    return make_quadratic(10, 10, 10.0, seed=0)


@pytest.fixture
def small_problem():
    return make_quadratic(6, 4, 3.0, seed=1)


@pytest.fixture
def unit_noise():
    return NoiseModel(1.0, 5)


def max_dev(A, B):
    return float(np.max(np.abs(A - B)))


_ACCEPTANCE = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
