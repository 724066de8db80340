"""Collects outcomes of tests marked ``@pytest.mark.criterion(n)`` and prints
one PASS/FAIL/SKIP line per acceptance criterion at the end of the run."""

from collections import defaultdict

import pytest

_outcomes = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number = marker.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.passed:
            _outcomes[number].append("PASS")
        elif report.skipped:
            _outcomes[number].append("SKIP")
        else:
            _outcomes[number].append("FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        results = _outcomes[number]
        if "FAIL" in results:
            status = "FAIL"
        elif all(r == "SKIP" for r in results):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status}  ({len(results)} test(s))")
