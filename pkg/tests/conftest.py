import numpy as np
import pytest

_CRITERIA = {}


def record_criterion(number, passed, detail=""):
    """Store a pass/fail line for the acceptance summary."""
    _CRITERIA[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
