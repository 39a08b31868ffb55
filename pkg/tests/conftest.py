"""Replays the acceptance suite's verdict lines after the run.

Output capture swallows in-test prints, so test_acceptance collects its
[criterion N] and [sweep] lines in REPORT_LINES and this hook writes them
into the terminal summary, where they always reach the log.
"""

import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", []) if mod else []
    if lines:
        terminalreporter.section("acceptance report")
        for line in lines:
            terminalreporter.write_line(line)
