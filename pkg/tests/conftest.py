import numpy as np
import pytest

from twolocus.environment import make_environment
from twolocus.grid import build_grid

ACCEPTANCE_LINES = []


def step(levels, breakpoint):
    return {"type": "step", "levels": list(levels), "breakpoints": [breakpoint]}


def step_env(n, a_levels, a_bp, b_levels, b_bp, length=1.0):
    grid = build_grid(length, n)
    return make_environment(step(a_levels, a_bp), step(b_levels, b_bp), grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def strong_env():
    # alpha and beta both change sign, means -0.2 and -0.4
    return step_env(129, [-1, 1], 0.6, [-1, 1], 0.7)


@pytest.fixture(scope="session")
def small_env():
    return step_env(65, [-1, 1.5], 0.5, [-1, 1], 0.45)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
