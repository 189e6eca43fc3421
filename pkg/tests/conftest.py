import re


_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")
_results = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.when == "call" or report.failed or report.skipped:
        prev = _results.get(key, (m.group(2), True))
        _results[key] = (prev[0], prev[1] and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results):
        name, ok = _results[key]
        terminalreporter.write_line(f"criterion {key} ({name.replace('_', ' ')}): {'PASS' if ok else 'FAIL'}")
