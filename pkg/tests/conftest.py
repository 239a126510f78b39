from __future__ import annotations

import numpy as np
import pytest

from taufeynman import GridSpec, LevySpec, gaussian_test_function

ACCEPTANCE_LINES: list[str] = []


def datum(q):
    return np.exp(-0.5 * np.asarray(q)[..., 0] ** 2)


@pytest.fixture
def phi():
    return datum


@pytest.fixture
def smooth_phi():
    return gaussian_test_function()


@pytest.fixture
def grid16():
    return GridSpec(-16.0, 16.0, 1024)


@pytest.fixture
def grid12():
    return GridSpec(-12.0, 12.0, 385)


@pytest.fixture
def one_atom():
    return LevySpec.from_pairs([(1.0, 1.0)])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
