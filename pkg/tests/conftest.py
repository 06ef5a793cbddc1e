"""Collects one pass/fail line per acceptance criterion for the summary."""

import pytest

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    def record(number, name, ok, detail):
        ACCEPTANCE[number] = (name, bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
