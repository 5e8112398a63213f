import numpy as np
import pytest

from l1control.dual import SolverConfig, solve
from l1control.problem import ProblemSpec, default_problem, discretize


def mixed_y_d(x1, x2):
    return 2.0 * np.sin(2 * np.pi * x1) * np.sin(np.pi * x2) + 0.6 * x1


# m=3 instance with an active upper bound and free negative components
MIXED = ProblemSpec(alpha=1e-2, beta=5e-3, a=-0.5, b=1.0, y_d=mixed_y_d)


@pytest.fixture(scope="session")
def default16():
    return discretize(default_problem(), 16)


@pytest.fixture(scope="session")
def default16_run(default16):
    return solve(default16, SolverConfig(stop_tol=1e-6))


@pytest.fixture(scope="session")
def mixed3():
    return discretize(MIXED, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = [mod.RESULTS[k] for k in sorted(mod.RESULTS)] if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
