import math

import numpy as np
import pytest

from solgas.domains import DiskDomain
from solgas.types import DensitySpec


@pytest.fixture
def ref_disk():
    return DiskDomain(1j, 0.1)


@pytest.fixture
def ref_density():
    return DensitySpec.constant(math.pi / 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
