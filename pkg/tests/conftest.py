import math

import pytest

from autopath import mapgen
from autopath.roadmap import load_map


@pytest.fixture(scope="session")
def straight_doc():
    """Two parallel 200 m lanes, nodes every 2 m."""
    return mapgen.straight_map(200.0)


@pytest.fixture
def straight_map(straight_doc):
    return load_map(straight_doc)


@pytest.fixture
def short_map():
    """Two 60 m lanes; small enough for brute-force oracles."""
    return load_map(mapgen.straight_map(60.0))


@pytest.fixture
def single_lane_map():
    return load_map(mapgen.generate_map([mapgen.Straight(120.0)], n_lanes=1, name="single"))


@pytest.fixture
def desk_map():
    return load_map(mapgen.desk_map())


LANE_Y = (-1.85, 1.85)
HALF_PI = math.pi / 2


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line per acceptance criterion; printed again in the terminal summary."""

    def log(criterion: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        print(line)
        request.config.stash.setdefault(ACCEPTANCE_LINES, []).append(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
