import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nflas.geometry import SPEED_OF_LIGHT, build_ula

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F30 = 30e9
LAM30 = SPEED_OF_LIGHT / F30
P = (1.928, 2.298)
Q = (2.898, -0.777)


@pytest.fixture
def ula128():
    return build_ula(128, LAM30 / 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


VERDICTS: list[str] = []


@pytest.fixture
def verdicts():
    return VERDICTS


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
