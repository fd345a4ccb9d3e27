import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")
    config.stash[_RESULTS] = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return report
    results = item.config.stash[_RESULTS]
    key = marker.args[0]
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or key not in results:
        prev = results.get(key, (marker.args[1], True))
        results[key] = (prev[0], prev[1] and not failed)
    return report


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        title, ok = results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {title}")
