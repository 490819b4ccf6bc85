import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

RESULTS = {}


def record(criterion, ok, detail):
    RESULTS[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, detail = RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
