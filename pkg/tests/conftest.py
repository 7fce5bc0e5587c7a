import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))  # oracle_kernels, make_fixtures


@pytest.fixture
def fixtures_dir():
    return TESTS / "fixtures"


CRITERIA: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one acceptance verdict; the lines are repeated in the terminal summary."""

    def _report(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA[n] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
