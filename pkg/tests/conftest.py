import numpy as np
import pytest

from gribov_lab import GribovParams


@pytest.fixture
def p_star():
    """Reference couplings used throughout the acceptance runs."""
    return GribovParams(lambda_cubic=1.0, lambda_quartic=1.0, mu=0.1, lambda_triple=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
