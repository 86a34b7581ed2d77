import pytest

_LINES = []


@pytest.fixture(scope="session")
def report():
    """Collect one PASS/FAIL line per acceptance criterion."""

    def add(number, ok, text):
        line = "criterion %d: %s  %s" % (number, "PASS" if ok else "FAIL", text)
        _LINES.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
