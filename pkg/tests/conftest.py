import numpy as np
import pytest

from multidec.rs import RSCode


@pytest.fixture(scope="session")
def rs15():
    return RSCode.create(15, 9)


@pytest.fixture(scope="session")
def rs255():
    return RSCode.create(255, 239)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    num, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    prev = _CRITERIA.get(num)
    if rep.failed or prev is None or prev[1] == "PASS":
        _CRITERIA[num] = (title, "FAIL" if rep.failed else "PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[num]
        line = f"criterion {num}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
