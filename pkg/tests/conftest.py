import numpy as np
import pytest

from fresnelwave.materials import MaterialTensors

_LINES = []


@pytest.fixture
def record():
    """Collect one acceptance line per criterion; printed in the terminal summary."""

    def add(number, name, passed, detail):
        _LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def biaxial():
    return MaterialTensors((1.0, 5.0, 15.0), (1.0, 1.0, 1.0), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
