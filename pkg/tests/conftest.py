import numpy as np
import pytest

from normclust.instance import line_instance

_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    ok = call.excinfo is None
    prev = _criteria.get(number)
    _criteria[number] = (title, ok and (prev is None or prev[1]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}")


@pytest.fixture
def three_points():
    """Points at 0, 2, 10 on a line; facilities at 0 and 10."""
    return line_instance([0, 2, 10], [0, 10], k=2)


@pytest.fixture
def kmedian_line():
    """Points at 0, 1, 5; facilities at 0 and 5; one center."""
    return line_instance([0, 1, 5], [0, 5], k=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
