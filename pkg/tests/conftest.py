import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def river1():
    from pathstable.hydro import build_river_problem

    return build_river_problem(1)


@pytest.fixture(scope="session")
def short_river():
    """Reduced instance: 8 h horizon, two binaries."""
    from pathstable.hydro import CascadeModel, build_river_problem

    return build_river_problem(1, CascadeModel.default(1).with_horizon(8))


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
