import re

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d\d)_(\w+)")
_results = {}  # criterion number -> (passed so far, test name)


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or report.skipped:
        return
    num = int(m.group(1))
    ok, _ = _results.get(num, (True, m.group(2)))
    _results[num] = (ok and report.passed, m.group(2))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        ok, name = _results[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {name}")
