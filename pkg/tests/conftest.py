import pytest

import quasispec as q

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fib():
    return q.builtin("fibonacci")


@pytest.fixture(scope="session")
def free():
    return q.builtin("free")


@pytest.fixture(scope="session")
def periodic02():
    return q.builtin("periodic_02")


@pytest.fixture
def record():
    """Append a one-line PASS/FAIL verdict for the acceptance summary."""

    def _record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
