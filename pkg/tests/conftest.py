import os

import pytest
from hypothesis import settings

from rkg.table import SHIPPED_ORDERS, default_table

settings.register_profile("rkg", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("rkg")

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def table():
    """The shipped coefficient table (all orders), validated on load."""
    return default_table(SHIPPED_ORDERS)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to an acceptance test's report line."""

    def _set(text):
        request.node.user_properties.append(("detail", text))

    return _set


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RKG_FULL_SCALE") == "1":
        return
    skip = pytest.mark.skip(reason="set RKG_FULL_SCALE=1 to run full-scale reproductions")
    for item in items:
        if "fullscale" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        details = [v for k, v in item.user_properties if k == "detail"]
        number, title = marker.args
        _ACCEPTANCE[item.nodeid] = (number, status, title, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, text in sorted(_ACCEPTANCE.values(), key=lambda r: r[0]):
        line = f"[{status}] criterion {number:>2}: {title}"
        terminalreporter.write_line(line + (f" -- {text}" if text else ""))
