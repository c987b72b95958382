"""Shared pytest wiring for the acceptance gate.

Tests marked @pytest.mark.acceptance(num, label) get one summary line each
at the end of the run, so the gate verdict can be read off the bottom of any
pytest invocation without scrolling through the full -v listing.
"""

import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(num, label): acceptance gate criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    # setup-phase skips (skipif, missing dep) never reach the call phase
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            verdict = "SKIP"
        elif report.passed:
            verdict = "PASS"
        else:
            verdict = "FAIL"
        _outcomes[tuple(marker.args)] = verdict


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance gate")
    for (num, label), verdict in sorted(_outcomes.items()):
        terminalreporter.write_line(f"ACCEPTANCE {num} {label}: {verdict}")
