import numpy as np
import pytest

from discrete_erg import LyapunovSpec, aircraft, bebop_drone, double_integrator
from discrete_erg.models import DI_P_PRINTED


@pytest.fixture(scope="session")
def di():
    return double_integrator()


@pytest.fixture(scope="session")
def di_printed():
    """Double integrator with the printed matrix and the stated bounds 2.2 and 22."""
    b = double_integrator("printed")
    lyap = LyapunovSpec.quadratic(DI_P_PRINTED, b.plant, m1=2.2, m2=22.0)
    return b, lyap


@pytest.fixture(scope="session")
def ac():
    return aircraft()


@pytest.fixture(scope="session")
def drone():
    return bebop_drone()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
