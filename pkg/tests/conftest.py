import numpy as np
import pytest

from gammalab.core import make_grid
from gammalab.gamma import GammaContext
from gammalab.generator import build_generator

ACCEPTANCE = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def circle512():
    grid = make_grid("circle", 512, 2 * np.pi)
    return GammaContext(build_generator(grid, np.zeros(grid.shape)), dV=np.zeros(512), d2V=np.zeros(512))


@pytest.fixture(scope="session")
def circle64():
    grid = make_grid("circle", 64, 2 * np.pi)
    return GammaContext(build_generator(grid, np.zeros(grid.shape)), dV=np.zeros(64), d2V=np.zeros(64))


@pytest.fixture(scope="session")
def circle_smooth_V():
    """Circle with V = 0.3 cos x and analytic derivatives, n = 256."""
    grid = make_grid("circle", 256, 2 * np.pi)
    x = grid.x
    return GammaContext(build_generator(grid, 0.3 * np.cos(x)), dV=-0.3 * np.sin(x), d2V=-0.3 * np.cos(x))
