import math

import numpy as np
import pytest

from varsense.bench import BenchConfig
from varsense.fisher import landscape_minimum

DEFAULT = BenchConfig()


@pytest.fixture(scope="session")
def default_minimum():
    """(cost, phi_hd, phi_alpha) of the closed-form landscape for the default probe."""
    return landscape_minimum(DEFAULT.r, DEFAULT.alpha, DEFAULT.eta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def angle_close(a, b, tol):
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


_ACCEPTANCE = {}


@pytest.fixture
def report_criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
