import numpy as np
import pytest

from convstab import expr as E


def build(term, box):
    return E.Expr.build(term, box)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform_points(expr, count, rng):
    lo, hi = expr.box
    return rng.uniform(lo, hi, size=(count, expr.n))


# one summary line per acceptance criterion
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, limit): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title, limit = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _CRITERIA[num] = (title, limit, "PASS" if rep.passed else "FAIL", rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, limit, status, took = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status}  {title}  ({took:.1f} s, limit {limit} s)")
