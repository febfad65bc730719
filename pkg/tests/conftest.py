import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collects PASS/FAIL lines for the acceptance summary."""
    def add(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
