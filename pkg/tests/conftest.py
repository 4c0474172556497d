"""Shared fixtures; acceptance lines are echoed in the terminal summary."""

import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def record_acceptance():
    def record(line: str):
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record
