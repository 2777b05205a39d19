import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from behavdiss import behavior as bh
from behavdiss.polymat import Poly, PolyMatrix
from behavdiss.realization import StateSpace

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SIGMA_1_M1 = np.diag([1.0, -1.0])


def P(*coeffs):
    """Polynomial from ascending coefficients."""
    return Poly(list(coeffs))


def pm(rows):
    """PolyMatrix from nested lists of coefficient tuples / scalars."""
    def conv(e):
        if isinstance(e, Poly):
            return e
        if isinstance(e, (list, tuple)):
            return Poly(list(e))
        return Poly.const(e)
    entries = [[conv(e) for e in row] for row in rows]
    return PolyMatrix(entries, len(entries), len(entries[0]) if entries else 0)


@pytest.fixture
def ex1_ss():
    return StateSpace([[0, -0.5], [1, -1.5]], [[-0.5], [-0.5]], [[0, -0.5]], [[0.5]])


@pytest.fixture
def ex2_ss():
    return StateSpace([[0, -1], [4, -4]], [[1], [2]], [[0, 1]], [[0]])


@pytest.fixture
def ex1_kernel():
    return bh.Behavior.kernel(pm([[(1, 2, 1), (-1, -3, -2)]]), io=((0,), (1,)))


@pytest.fixture
def sigma():
    return SIGMA_1_M1.copy()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
