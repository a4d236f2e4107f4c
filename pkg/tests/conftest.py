import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Acceptance checks register one line each here; the terminal summary
# prints them together so the verdict is readable in one block.
ACCEPTANCE_LOG: list[str] = []


def record_acceptance(name: str, passed: bool | None, detail: str) -> None:
    verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LOG.append("%s  %s: %s" % (verdict, name, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance checks")
    for line in ACCEPTANCE_LOG:
        terminalreporter.write_line(line)
