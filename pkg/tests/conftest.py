import numpy as np
import pytest
from hypothesis import settings

from plaplab import RadialGrid

settings.register_profile("lab", max_examples=100, derandomize=True, deadline=None)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def grid():
    return RadialGrid.geometric()


@pytest.fixture(scope="session")
def small_grid():
    return RadialGrid.geometric(M=256)


@pytest.fixture(scope="session")
def bessel_zero():
    """First positive zero of J_nu, bracketed and refined with brentq."""
    from scipy.optimize import brentq
    from scipy.special import jv

    def zero(nu):
        x = np.linspace(0.5, 10, 2000)
        y = jv(nu, x)
        i = np.flatnonzero(np.sign(y[1:]) != np.sign(y[:-1]))[0]
        return brentq(lambda s: jv(nu, s), x[i], x[i + 1], xtol=1e-15)

    return zero


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
