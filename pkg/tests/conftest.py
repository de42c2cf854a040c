import numpy as np
import pytest

from satbackstep import compute_kernels, example1, example2


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex2():
    return example2()


@pytest.fixture(scope="session")
def ex1_kernels(ex1):
    return compute_kernels(*ex1, dx=0.04)


@pytest.fixture(scope="session")
def ex2_kernels(ex2):
    return compute_kernels(*ex2, dx=0.04)


@pytest.fixture(scope="session")
def ex1_kernels_fine(ex1):
    return compute_kernels(*ex1, dx=0.01)


@pytest.fixture(scope="session")
def ex2_kernels_fine(ex2):
    return compute_kernels(*ex2, dx=0.01)


def smooth_state(rng, x, n=1, modes=5):
    """Random smooth field (cosine modes plus a cubic) and ODE state."""
    u = sum(rng.normal() * np.cos(m * np.pi * x) / (m + 1) ** 2 for m in range(modes))
    u = u + rng.normal() * x**3
    return rng.normal(size=n), u


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
