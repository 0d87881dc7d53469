from __future__ import annotations

import pytest

from epsplan.driver import RunOptions, run_study
from epsplan.fixtures import two_zone_spec
from epsplan.scenarios import LIBRARY_ORDER, builtin_library
from epsplan.system import validate_system

# lines reported by the acceptance suite, printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def spec():
    return two_zone_spec()


@pytest.fixture(scope="session")
def system(spec):
    return validate_system(spec)


@pytest.fixture(scope="session")
def library():
    return builtin_library()


@pytest.fixture(scope="session")
def study(system, library, tmp_path_factory):
    """The full eleven-scenario study on the two-zone fixture, hourly detail kept."""
    opts = RunOptions(cache_dir=str(tmp_path_factory.mktemp("cache")))
    return run_study(system, [library[n] for n in LIBRARY_ORDER], opts)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
