from __future__ import annotations

import pytest

from vtd.precision import working_precision

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _full_width():
    with working_precision(512):
        yield


@pytest.fixture(scope="session")
def record_criterion():
    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
