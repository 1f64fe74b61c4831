import numpy as np
import pytest

from cimsim.fixedpoint import FixedPointMatrix, int_range


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def rand_fp(rng, rows, cols, bits):
    lo, hi = int_range(bits)
    return FixedPointMatrix(rng.integers(lo, hi + 1, size=(rows, cols)), bits)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
