"""Shared test wiring: the acceptance suite's per-criterion verdict log."""

import pytest

_RESULTS: list = []


@pytest.fixture(scope="session")
def criterion_log():
    """Record one (number, name, ok) verdict per acceptance criterion."""

    def record(num: int, name: str, ok: bool) -> bool:
        _RESULTS.append((num, name, bool(ok)))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok in sorted(_RESULTS):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[criterion {num:02d}] {verdict} {name}")
