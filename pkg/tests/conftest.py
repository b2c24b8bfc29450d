import numpy as np
import pytest
from hypothesis import settings

from reggecurv.mesh import perturb, structured_unit_square
from reggecurv.spaces import AnalyticMetric, AnalyticTensor

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

GRAPH = "1/2*(x^2+y^2) - 1/12*(x^4+y^4)"
SIGMA = ("sin(x+2*y)", "cos(x*y)", "exp(x-y)")


@pytest.fixture(scope="session")
def gex():
    return AnalyticMetric.from_graph(GRAPH)


@pytest.fixture(scope="session")
def sigma_smooth():
    return AnalyticTensor(*SIGMA)


@pytest.fixture(scope="session")
def mesh4():
    return perturb(structured_unit_square(4), 0.25, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(LINES):
            terminalreporter.write_line(LINES[number])
