import numpy as np
import pytest

from cbfslip.fespace import build_dofmap
from cbfslip.mesh import unit_square_mesh

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[1, 2, 4])
def small_mesh(request):
    return unit_square_mesh(request.param)


@pytest.fixture
def mesh4():
    m = unit_square_mesh(4)
    return m, build_dofmap(m)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
