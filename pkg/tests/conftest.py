"""Shared fixtures and the acceptance-criterion summary printed at the end of a run."""

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    """Store and print one pass/fail line; the caller asserts ``ok`` afterwards."""
    line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_order):
            terminalreporter.write_line(line)


def _order(line):
    head = line.split(":", 1)[0].split()
    return (int(head[1]) if len(head) > 1 and head[1].isdigit() else 99, line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
