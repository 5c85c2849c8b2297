import numpy as np
import pytest

from aeroguard import tensor


@pytest.fixture(autouse=True)
def _clean_engine():
    """Keep tests isolated: fresh tape, default dtype, grad mode on."""
    tensor.clear_tape()
    tensor._state["dtype"] = np.float32
    tensor._state["grad"] = True
    yield
    tensor.clear_tape()
    tensor._state["dtype"] = np.float32
    tensor._state["grad"] = True


_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
