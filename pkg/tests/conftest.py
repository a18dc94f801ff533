import sys
from collections import OrderedDict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from secrecy_fading.config import SolverConfig  # noqa: E402

_criteria = OrderedDict()


@pytest.fixture(scope="session")
def cfg():
    return SolverConfig()


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = _criteria_marker(report)
    if marker is None:
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "passed": True, "tests": 0})
    entry["tests"] += 1
    if not report.passed:
        entry["passed"] = False


def _criteria_marker(report):
    for name, args in report.user_properties:
        if name == "criterion":
            return args
    return None


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["passed"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number}: {entry['title']}")
