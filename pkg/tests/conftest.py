import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("rmtlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rmtlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def mc_ok(estimate, target, se, k=5.0):
    """Monte Carlo agreement within k standard errors."""
    return abs(estimate - target) <= k * se


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
