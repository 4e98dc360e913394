import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report(capsys):
    """Print one PASS/FAIL line per criterion, live and again at the end."""

    def report(number, ok, detail):
        line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
