import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def lorentz_inner(x, y):
    """Independent transcription of -x0*y0 + sum xi*yi for the tests."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def hyperboloid_point(e):
    """[cosh r, sinh r * e / r] written out with scalar math."""
    e = np.asarray(e, dtype=np.float64)
    r = float(np.linalg.norm(e))
    if r == 0.0:
        return np.r_[1.0, np.zeros_like(e)]
    return np.r_[np.cosh(r), np.sinh(r) * e / r]


ACCEPTANCE_LINES = []


def acceptance_line(criterion, ok, detail):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
