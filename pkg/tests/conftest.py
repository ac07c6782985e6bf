import sys

import pytest

from cavsim.experiments import gaussian_on_default_grid
from cavsim.params import CavityParams


@pytest.fixture(scope="session")
def fig_params():
    return CavityParams(g=3.0, gamma_s=1.0, delta=0.0)


@pytest.fixture(scope="session")
def pulse240(fig_params):
    return gaussian_on_default_grid(240.0, fig_params)


@pytest.fixture(scope="session")
def pulse60(fig_params):
    return gaussian_on_default_grid(60.0, fig_params)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
