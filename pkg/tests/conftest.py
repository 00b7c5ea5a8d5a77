"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

_RESULTS = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    n = mark.args[0]
    ok = call.excinfo is None
    if call.when == "call" or not ok:
        _RESULTS[n] = _RESULTS.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _RESULTS[n] else 'FAIL'}")
