import numpy as np
import pytest

from gridsync.machines import MachineKind, MachineParams
from gridsync.network import NetworkModel

_ACCEPTANCE = {}


@pytest.fixture
def two_bus():
    """2-bus line, ratings (1, 0.25), unit susceptance."""
    return NetworkModel(2, [(0, 1, 1.0)], np.array([1.0, 0.25]))


@pytest.fixture
def triangle():
    return NetworkModel(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], np.ones(3))


@pytest.fixture
def unit_swing():
    return MachineParams(MachineKind.SWING, 1.0, 1.0)


@pytest.fixture
def unit_turbine():
    return MachineParams(MachineKind.TURBINE, 1.0, 1.0, 1.0, 1.0)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    crit = marker.kwargs["criterion"]
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if report.when == "call" or failed:
        prev = _ACCEPTANCE.get(crit, (marker.kwargs.get("title", item.name), True))
        _ACCEPTANCE[crit] = (prev[0], prev[1] and not failed and report.outcome != "skipped")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[crit]
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {title}")
