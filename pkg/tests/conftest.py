import numpy as np
import pytest

from osfs import TraceWindow


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_window(rng):
    X = rng.normal(size=(40, 6))
    y = X[:, 0] * 2 + X[:, 1] + 10
    return TraceWindow.from_array(X, y=y)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
