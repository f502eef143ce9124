import warnings
from pathlib import Path

import numpy as np
import pytest

from hndpv.instance import Instance, VehicleConfig

DATA = Path(__file__).parent / "data"


def t3_instance(**changes) -> Instance:
    """Three nodes, unit fixed costs of 1000, primary Q=100 and secondary q=50."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        v = VehicleConfig(Q=100, q=50, B=10, b=5)
    inst = Instance(
        flow=np.array([[0, 60, 50], [30, 0, 70], [20, 40, 0]], float),
        distance=np.array([[0, 10, 20], [10, 0, 15], [20, 15, 0]], float),
        fixed_cost=np.full(3, 1000.0),
        capacity=np.full(3, np.inf),
        vehicle=v,
        name="t3",
    )
    return inst.replace(**changes) if changes else inst


@pytest.fixture
def t3():
    return t3_instance()


@pytest.fixture
def t3_path():
    return DATA / "t3.json"


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
