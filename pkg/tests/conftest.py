import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    entries = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and "test_criterion" in nodeid:
                name = nodeid.split("::")[-1]
                entries.append((name, "PASS" if status == "passed" else "FAIL"))
    if entries:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, verdict in sorted(set(entries)):
            terminalreporter.write_line(f"{verdict}  {name}")
