import numpy as np
import pytest

from amp_gdf.amp import RegressionInstance


@pytest.fixture
def gaussian_instance():
    def make(N=200, M=100, seed=0, sigma_y2=1.0):
        rng = np.random.default_rng(seed)
        A = rng.normal(0.0, 1.0 / np.sqrt(M), size=(M, N))
        y = rng.normal(0.0, np.sqrt(sigma_y2), size=M)
        return RegressionInstance(y, A, sigma_y2)

    return make


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
