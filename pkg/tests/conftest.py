import numpy as np
import pytest

from stadium_spectra.geometry import GridSpec, StadiumGeometry, build_grid


@pytest.fixture(scope="session")
def disk_grid_coarse():
    return build_grid(StadiumGeometry(0.0), GridSpec(1 / 8))


@pytest.fixture(scope="session")
def stadium_grid_coarse():
    return build_grid(StadiumGeometry(1.0), GridSpec(1 / 8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
