import numpy as np
import pytest

_VERDICTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line; returns the boolean so the test can assert on it."""
    def record(number, ok, detail):
        line = f"criterion {number:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok
    return record


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)
