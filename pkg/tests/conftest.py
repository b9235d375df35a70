"""Collects acceptance outcomes and prints one line per criterion after the run."""

import pytest

_OUTCOMES = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when not in ("setup", "call"):
        return
    key = marker.args
    if rep.failed or (rep.when == "call"):
        prev = _OUTCOMES.get(key, True)
        _OUTCOMES[key] = prev and not rep.failed


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(_OUTCOMES.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}")
