"""Shared pytest plumbing.

The acceptance suite records one verdict line per criterion; they are printed
as a block in the terminal summary so a plain `pytest -v` run always shows
them, pass or fail.
"""

CRITERION_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERION_LINES.append(
        f"criterion {number:02d}: {'PASS' if passed else 'FAIL'} — {detail}"
    )


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERION_LINES):
        terminalreporter.write_line(line)
