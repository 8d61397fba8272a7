import time

import pytest

from repeater_dp.noise import HardwareParams
from repeater_dp.planner import DPTable, PlannerOptions
from repeater_dp.states import ClassGrid

N_FULL = 128


def timed_build(table, n):
    start = time.perf_counter()
    table.build(n)
    table.build_seconds = time.perf_counter() - start
    return table


@pytest.fixture(scope="session")
def default_hp():
    return HardwareParams()


@pytest.fixture(scope="session")
def bdcz_table(default_hp):
    """Default BDCZ table to 1280 km; shared by planner and acceptance tests."""
    return timed_build(DPTable(default_hp, ClassGrid.uniform(), PlannerOptions(scheme="bdcz")), N_FULL)


@pytest.fixture(scope="session")
def ctsl_table(default_hp):
    return timed_build(DPTable(default_hp, ClassGrid.uniform(), PlannerOptions(scheme="ctsl")), N_FULL)


@pytest.fixture(scope="session")
def ctsl_single_level_table(default_hp):
    """CTSL without multilevel pumping, to 500 km."""
    opts = PlannerOptions(scheme="ctsl", allow_multilevel=False)
    return DPTable(default_hp, ClassGrid.uniform(), opts).build(50)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("tests.test_acceptance")
    if module is not None and module.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in module.REPORT:
            terminalreporter.write_line(line)
