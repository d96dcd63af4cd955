import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kppdomain import geometry

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

PI2 = math.pi**2
J01_SQ = 5.783185962946784  # scipy.special.jn_zeros(0, 1)[0] ** 2
ROBIN_MU = 1.3065423741888063  # root of mu tan(mu/2) = 1 in (1.2, 1.4)


@pytest.fixture(scope="session")
def small_comb():
    return geometry.build_comb(12, 2, [1, 2], 4, 1, 0.125)


@pytest.fixture(scope="session")
def unit_square():
    return geometry.build_rectangle(1, 1, 1 / 16, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record(n: int, title: str, ok: bool, detail: str) -> str:
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
