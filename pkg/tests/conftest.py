import pytest

CRITERIA = {}


def record(number, ok, detail):
    """Keep one verdict line per acceptance criterion for the terminal summary."""
    CRITERIA[number] = (bool(ok), detail)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
