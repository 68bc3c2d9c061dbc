"""Collects the acceptance verdicts and prints them after the run."""

import pytest

VERDICTS = []


@pytest.fixture
def verdict():
    """Call ``verdict(label, ok, detail)`` once per criterion."""
    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
