import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# acceptance criteria append (number, PASS/FAIL, description, detail) here
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, verdict, name, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{verdict}] {n:2d}. {name}: {detail}")
