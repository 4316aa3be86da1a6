import numpy as np
import pytest

from mkdvlab.grid import make_grid


@pytest.fixture(scope="session")
def grid80():
    return make_grid(80.0, 2048)


@pytest.fixture(scope="session")
def grid80_1024():
    return make_grid(80.0, 1024)


@pytest.fixture(scope="session")
def grid2pi():
    return make_grid(2 * np.pi, 64)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
