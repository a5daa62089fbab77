import numpy as np
import pytest

from conspaste.grid import GridSpec


@pytest.fixture
def spec64():
    return GridSpec.square(64)


@pytest.fixture
def spec32():
    return GridSpec.square(32)


def sup(a) -> float:
    return float(np.max(np.abs(a)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
