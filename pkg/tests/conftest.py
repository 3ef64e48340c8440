import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from rdcontrol import Nonlinearity  # noqa: E402


@pytest.fixture(scope="session")
def cubic():
    return Nonlinearity.cubic(1 / 3)


@pytest.fixture(scope="session")
def cubic_half():
    return Nonlinearity.cubic(0.5)


@pytest.fixture(scope="session")
def logistic():
    return Nonlinearity.logistic()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"{n:2d} {'PASS' if ok else 'FAIL'}: {detail}")
