import math

import pytest
from hypothesis import HealthCheck, settings

from corner_cgo.analytic import PhaseParams, SectorDomain

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def sector60():
    return SectorDomain(math.pi / 3)


@pytest.fixture
def phase_half():
    return PhaseParams(0.5, 0.1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("acceptance_report")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.LINES:
        terminalreporter.write_line(line)
