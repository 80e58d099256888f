import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Capture hides the per-criterion verdicts of passing tests; echo the
    # full scoreboard whenever the acceptance module ran.
    acc = sys.modules.get("test_acceptance")
    if acc is None or not getattr(acc, "REPORTED", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in acc.REPORTED:
        terminalreporter.write_line(line)
