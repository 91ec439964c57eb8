import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def general_points(rng, count, dim, scale=1.0):
    """Gaussian points; almost surely in general position."""
    return scale * rng.standard_normal((count, dim))


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""
    def record(number: int, name: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
