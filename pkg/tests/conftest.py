import math
import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from photonscint import BeamParams, TurbulenceParams  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

L0_INNER = 2.0 * math.pi * 1e-3   # l0 / 2pi = 1 mm


@pytest.fixture(scope="session")
def strong_turb():
    return TurbulenceParams(cn2=1e-13, l0=L0_INNER)


@pytest.fixture(scope="session")
def moderate_turb():
    return TurbulenceParams(cn2=2.5e-14, l0=L0_INNER)


@pytest.fixture(scope="session")
def coherent_beam():
    return BeamParams(r0=0.01, q0=1e7)


@pytest.fixture(scope="session")
def diffuser_beam():
    # r1**2 / r0**2 = 1/2
    return BeamParams(r0=0.01, q0=1e7, lambda_diffuser=0.01 * math.sqrt(2.0))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.verdict_lines():
        terminalreporter.write_line(line)
