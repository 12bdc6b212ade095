import pytest

_CRITERIA: dict[int, tuple[str, str, float | None]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        elapsed = dict(item.user_properties).get("elapsed")
        _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", elapsed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, elapsed = _CRITERIA[number]
        timing = f" ({elapsed:.2f} s)" if elapsed is not None else ""
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}{timing}")
