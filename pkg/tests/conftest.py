import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from ctlab import fbp, phantom  # noqa: E402
from ctlab.grids import ImageGrid, SinogramGrid  # noqa: E402


@pytest.fixture(scope="session")
def skull():
    return phantom.skullish()


@pytest.fixture(scope="session")
def grid512():
    return SinogramGrid(512, 512)


@pytest.fixture(scope="session")
def image256():
    return ImageGrid(256, 1.0)


@pytest.fixture(scope="session")
def skull_sinogram(skull, grid512):
    return phantom.simulate_sinogram(skull, grid512)


@pytest.fixture(scope="session")
def skull_full(skull_sinogram, image256):
    return fbp.reconstruct(skull_sinogram, None, image256)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
