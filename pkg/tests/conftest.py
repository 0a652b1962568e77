import numpy as np
import pytest

from zenosim.core import Dataset, quadratic_task


@pytest.fixture(scope="session")
def half_square():
    """Noise-free 1-D task f(x) = x^2 / 2 with a one-point batch."""
    return quadratic_task([1.0], [0.0]), Dataset(np.zeros((1, 1)), np.zeros(1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
