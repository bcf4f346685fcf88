"""Acceptance reporting: one PASS/FAIL line per criterion after the run.

Acceptance tests carry ``@pytest.mark.criterion("name")`` and may attach a
short measurement with ``record_property("detail", ...)``.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _RESULTS[marker.args[0]] = (report.outcome == "passed", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in _RESULTS.items():
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
