import pytest

# Acceptance tests append one line each; printed after the run so the lines
# appear in the terminal summary regardless of output capturing.
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
