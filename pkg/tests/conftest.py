"""Shared pytest wiring: acceptance criteria get a visible summary line each."""

from __future__ import annotations

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        if report.skipped:
            _acceptance_outcomes[name] = "SKIP"
        else:
            _acceptance_outcomes[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.skipped:
        _acceptance_outcomes[name] = "SKIP"
    elif report.when == "setup" and report.failed:
        _acceptance_outcomes[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_outcomes.items():
        terminalreporter.write_line(f"[{outcome}] {name}")
