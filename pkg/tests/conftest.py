from collections import OrderedDict

import pytest

from lsafnet.data import gen_synthetic

_criteria = OrderedDict()


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """Eight 32x32 synthetic pairs with three classes."""
    return gen_synthetic(tmp_path_factory.mktemp("synth32"), seed=7, count=8, size=32, num_classes=3)


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ok = _criteria.get(marker, True) and report.outcome == "passed"
        _criteria[marker] = ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _criteria.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
