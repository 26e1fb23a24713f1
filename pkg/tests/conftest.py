import pytest

# One line per acceptance criterion, echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    def record(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
