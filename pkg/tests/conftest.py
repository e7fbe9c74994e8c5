"""Shared pytest wiring: acceptance-criterion summary lines."""

ACCEPTANCE_PREFIX = "tests/test_acceptance.py"

_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].removeprefix("test_")
    _results.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _results:
        label = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"ACCEPTANCE {name}: {label}")
