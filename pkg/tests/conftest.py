import numpy as np
import pytest

from rdrs_lab.capacity import CapacityRegion
from rdrs_lab.game import Example1Params, Example2Params, PriceMap
from rdrs_lab.rdrs import DiffusionParams

LAM = (10 / 3, 5.0)
M = (3.0, 1.0)
MU = (0.1, 0.05)
ALPHA2 = (10.0, 20.0)
ZETA2 = (1.0, 2.0)
BETA2 = (10.0, 20.0)
THETA = (-1.0, -1.2)


@pytest.fixture
def ex1_diffusion():
    return DiffusionParams(LAM, M, MU, ALPHA2, ZETA2, BETA2, THETA, (1000.0, 1000.0))


@pytest.fixture
def ex2_diffusion():
    return DiffusionParams(LAM + (10 / 3,), M + (3.0,), MU + (0.1,), ALPHA2 + (10.0,), ZETA2 + (1.0,),
                           BETA2 + (10.0,), THETA + (-1.0,), (1000.0,) * 3)


@pytest.fixture
def ex1_params():
    return Example1Params(0.1, 0.05, 1000.0, 1000.0)


@pytest.fixture
def ex2_params():
    return Example2Params((0.1, 0.05, 0.1), (1000.0, 1000.0, 1000.0))


@pytest.fixture
def ex1_prices():
    return PriceMap((0.64, 0.8), (np.inf, np.inf), (9.0, 3.0))


@pytest.fixture
def ex2_prices():
    return PriceMap((0.49, 0.7, 0.49), (4.0, 2.0, 4.0), (2.25, 1.5, 2.25))


@pytest.fixture
def box2():
    return CapacityRegion.box_sum([1500.0, 1500.0], 2000.0)


@pytest.fixture
def box3():
    return CapacityRegion.box_sum([1500.0, 1500.0, 1500.0], 2000.0)


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """Record and assert one acceptance criterion: ``criterion(k, ok, detail)``."""

    def check(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        request.config.stash[_CRITERIA].append((k, line))
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
