import numpy as np
import pytest

from kbandit import KernelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gauss():
    return KernelSpec("gaussian", 1.0)


@pytest.fixture
def linear():
    return KernelSpec("linear")


def ball(rng, n, d):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((n, 1)) ** (1.0 / d)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    lines = test_acceptance.report_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
