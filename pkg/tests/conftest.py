import pytest

from curvyplan.config import load_config
from curvyplan.sim import run_scenario


@pytest.fixture(scope="session")
def case1_cfg():
    return load_config("case1")


@pytest.fixture(scope="session")
def case2_cfg():
    return load_config("case2")


@pytest.fixture(scope="session")
def case1_trace(case1_cfg):
    c = case1_cfg
    return run_scenario(c.scenario, c.params, c.planner, c.seed)


@pytest.fixture(scope="session")
def case2_trace(case2_cfg):
    c = case2_cfg
    return run_scenario(c.scenario, c.params, c.planner, c.seed)


@pytest.fixture(scope="session")
def case1_context(case1_trace):
    return case1_trace.maneuver.context


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
