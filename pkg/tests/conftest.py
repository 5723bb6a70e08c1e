"""Shared fixtures; collects acceptance verdicts for the terminal summary."""

import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """``verdict(k, passed, detail)`` prints and records one criterion line."""
    def record(k, passed, detail):
        line = f"criterion {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _VERDICTS[k] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
