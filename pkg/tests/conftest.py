"""Shared fixtures: the benchmark double-integrator study setup.

Start at x0 = (6, 5), drive position to -7 inside the [-10, 10]^2 box with
inputs in [-20, 20]; position-barrier gains (105, 20.5), velocity-barrier
gain 2, decay rate 0.8.  The fixed-period baseline uses t_p = 0.75 s.
"""

import numpy as np
import pytest

from safehold import (
    SimConfig,
    TriggerConfig,
    double_integrator,
    double_integrator_clf,
    double_integrator_safety,
)

#: one-line verdicts collected by the acceptance suite, echoed at the end of
#: the pytest run so they are visible even when output capture is on
ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

STUDY = dict(
    x1_min=-10.0,
    x1_max=10.0,
    x2_min=-10.0,
    x2_max=10.0,
    position_gains=(105.0, 20.5),
    velocity_gain=2.0,
    x1_d=-7.0,
    epsilon=0.8,
    u_min=-20.0,
    u_max=20.0,
    x0=(6.0, 5.0),
    t_p=0.75,
)


@pytest.fixture(scope="session")
def plant():
    return double_integrator()


@pytest.fixture(scope="session")
def safety():
    return double_integrator_safety(
        STUDY["x1_min"],
        STUDY["x1_max"],
        STUDY["x2_min"],
        STUDY["x2_max"],
        position_gains=STUDY["position_gains"],
        velocity_gain=STUDY["velocity_gain"],
    )


@pytest.fixture(scope="session")
def clf():
    return double_integrator_clf(x1_d=STUDY["x1_d"], epsilon=STUDY["epsilon"])


@pytest.fixture(scope="session")
def box():
    return (np.array([STUDY["u_min"]]), np.array([STUDY["u_max"]]))


@pytest.fixture(scope="session")
def study_config():
    """Self-triggered study configuration at full resolution."""
    return SimConfig(
        x0=np.asarray(STUDY["x0"], dtype=float),
        dt_int=0.0025,
        trigger=TriggerConfig(tau_min=0.01, tau_max=2.0),
    )


@pytest.fixture(scope="session")
def coarse_config():
    """Same study at coarser resolution, for cheap module-level runs."""
    return SimConfig(
        x0=np.asarray(STUDY["x0"], dtype=float),
        dt_int=0.01,
        trigger=TriggerConfig(tau_min=0.04, tau_max=2.0),
    )
