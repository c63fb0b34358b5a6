import numpy as np
import pytest

from waveprobe.grid import make_grid


@pytest.fixture
def grid2():
    return make_grid(2, 1.0, 1.0, 32, 16)


@pytest.fixture
def grid1():
    return make_grid(1, 1.0, 1.0, 32, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(number, label, ok, detail):
        _VERDICTS.append((number, label, bool(ok), detail))
        assert ok, f"criterion {number} ({label}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, ok, detail in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'} {label}: {detail}")
