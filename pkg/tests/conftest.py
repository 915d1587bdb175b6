import sys
from pathlib import Path

# make tests/oracles.py etc importable when running from the repo root
sys.path.insert(0, str(Path(__file__).parent))

import acceptance_report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_report.lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in acceptance_report.lines:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")
