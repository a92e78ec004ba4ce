import sys

import numpy as np
import pytest
from scipy.special import exp1

from polaron_reset.bath import SpectralDensityParams, discretize

OMEGA_Q = 2 * np.pi * 5.0


def continuum_sum_f2_closed_form(alpha=0.03):
    """int_0^inf J(w) / (4 (w + w_q)^2) dw for w_c = w_q, via the exponential integral."""
    e_e1 = np.e * exp1(1.0)
    return 0.5 * alpha * (e_e1 - (1.0 - e_e1))


@pytest.fixture(scope="session")
def params():
    return SpectralDensityParams()


@pytest.fixture(scope="session")
def wq():
    return OMEGA_Q


@pytest.fixture(scope="session")
def default_bath(params):
    return discretize(params, 2000)


@pytest.fixture(scope="session")
def coarse_bath(params):
    return discretize(params, 150)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
