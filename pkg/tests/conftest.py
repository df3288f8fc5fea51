import pytest

_ROWS = []


@pytest.fixture
def report():
    """Record a verification row; all rows are echoed in the terminal summary."""
    def add(row):
        _ROWS.append(row.line())
        print(row.line())
        return row
    return add


def pytest_terminal_summary(terminalreporter):
    if _ROWS:
        terminalreporter.section("acceptance criteria")
        for line in _ROWS:
            terminalreporter.write_line(line)
