import pytest

from nlsexit.experiments import oriented_spectrum
from nlsexit.grid import make_grid
from nlsexit.ground_state import solve_ground_state
from nlsexit.linearized import QuadFormContext, solve_spectrum

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid():
    return make_grid(1, 20.0, 2048)


@pytest.fixture(scope="session")
def gs(grid):
    return solve_ground_state(grid, 7.0)


@pytest.fixture(scope="session")
def ctx(gs):
    return QuadFormContext(gs)


@pytest.fixture(scope="session")
def sb(ctx):
    return oriented_spectrum(solve_spectrum(ctx))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
