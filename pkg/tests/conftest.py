"""Shared pytest hooks: replay acceptance report lines after the run.

Passing tests have their stdout captured, so the per-criterion report lines
emitted by tests/test_acceptance.py are collected here and written into the
terminal summary, where they are visible without -s.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance report")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
