import numpy as np
import pytest

from wellsplit.dynamics import compute_instanton
from wellsplit.potentials import PotentialSpec

# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def separable():
    return PotentialSpec("separable-quartic", alpha=1.0, a=1.0, omega=3.0)


@pytest.fixture(scope="session")
def curved():
    return PotentialSpec("curved-quartic", alpha=0.25, a=1.0, omega=2.5, d=0.3)


@pytest.fixture(scope="session")
def separable_instanton(separable):
    return compute_instanton(separable)


@pytest.fixture(scope="session")
def curved_instanton(curved):
    return compute_instanton(curved)


@pytest.fixture(scope="session")
def quartic_1d():
    return lambda x: (np.asarray(x) ** 2 - 1.0) ** 2
