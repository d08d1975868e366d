"""Collect acceptance verdicts and print them after the test session."""

import pytest


def pytest_configure(config):
    config._acceptance = []


@pytest.fixture
def verdict(request):
    """Record ``(criterion, ok, detail)`` and echo one PASS/FAIL line."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        print(line)
        request.config._acceptance.append((number, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(getattr(config, "_acceptance", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
