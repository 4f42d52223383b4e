import pytest

CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one 'CRITERION n PASS/FAIL detail' line; the caller still asserts."""

    def record(n: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {n} {'PASS' if passed else 'FAIL'} {detail}"
        CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERIA, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
