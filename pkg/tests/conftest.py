"""Shared test configuration: acceptance-criterion reporting.

Each acceptance test registers a one-line verdict through record_criterion;
the collected lines are printed after the normal pytest summary so a full
run always ends with one PASS/FAIL line per criterion.
"""

from __future__ import annotations

_CRITERION_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _CRITERION_LINES[number] = f"{status} criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[number])
