import mpmath as mp
import numpy as np
import pytest

mp.mp.dps = 40


def rel(a, b):
    a = complex(a)
    b = complex(b)
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    # the acceptance module leaves one PASS/FAIL line per criterion here
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
