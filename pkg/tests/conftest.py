import os

import pytest
from hypothesis import HealthCheck, settings

from thurston.potentials import shipped_potential, zero_potential
from thurston.sphere_map import shipped_map, shipped_subdivision_rule

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def backend():
    return shipped_map()


@pytest.fixture(scope="session")
def engine(backend):
    return backend.engine


@pytest.fixture(scope="session")
def rule():
    return shipped_subdivision_rule()


@pytest.fixture(scope="session")
def phi():
    return shipped_potential()


@pytest.fixture(scope="session")
def zero():
    return zero_potential()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
