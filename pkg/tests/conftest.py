import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nonlocal_traffic.grid import Grid1D, Profile

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_profile(values, x_left=0.0, dx=0.1, left=None, right=None):
    v = np.asarray(values, dtype=float)
    g = Grid1D(x_left, dx, v.size, float(v[0] if left is None else left), float(v[-1] if right is None else right))
    return Profile(g, v)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion: ``criterion(n, ok, detail)``."""
    def record(n, ok, detail=""):
        ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(ACCEPTANCE_LINES[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
