"""Collects acceptance verdicts and prints them as one block at the end of the run."""

import pytest

VERDICTS: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def verdict():
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        VERDICTS[number] = (bool(passed), title, detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        passed, title, detail = VERDICTS[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} #{n:<2} {title}: {detail}")
