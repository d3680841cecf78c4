import time

import pytest

_RESULTS = {}
_START = time.perf_counter()
SUITE_LIMIT_S = 600.0


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    _RESULTS[number] = (title, report.passed, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, passed, duration = _RESULTS[number]
        tr.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({duration:.1f} s)")
    total = time.perf_counter() - _START
    verdict = "PASS" if total < SUITE_LIMIT_S else "FAIL"
    tr.write_line(f"{verdict} full suite wall time {total:.1f} s (limit {SUITE_LIMIT_S:.0f} s)")
