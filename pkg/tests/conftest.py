import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.linalg import expm

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def j_interleaved(n):
    J = np.zeros((2 * n, 2 * n))
    for j in range(n):
        J[2 * j, 2 * j + 1] = -1.0
        J[2 * j + 1, 2 * j] = 1.0
    return J


# a fixed non-unitary symplectic matrix, rebuilt independently of the package
FIXED_S = np.array([[1.0, 0.3, 0.2, 0.0], [0.3, 0.5, 0.0, 0.1], [0.2, 0.0, 0.8, 0.4], [0.0, 0.1, 0.4, 0.6]])


@pytest.fixture
def fixed_symplectic():
    return expm(0.7 * j_interleaved(2) @ FIXED_S)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
