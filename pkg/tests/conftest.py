import pytest
from hypothesis import HealthCheck, settings

from pinched_sna.certify import search_constants
from pinched_sna.system import tanh_system

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# first kappa at which the tanh family certifies on a 50-step sweep (golden mean, d = 1.01)
CERTIFIED_KAPPA = 1200.0

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def sys3():
    return tanh_system(3.0)


@pytest.fixture(scope="session")
def certified():
    """(system, constants, report) for the tanh family at CERTIFIED_KAPPA."""
    sys = tanh_system(CERTIFIED_KAPPA)
    constants, report = search_constants(sys)
    return sys, constants, report


@pytest.fixture
def criterion_line():
    """Record one summary line per acceptance criterion."""
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
