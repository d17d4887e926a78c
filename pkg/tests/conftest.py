import numpy as np
import pytest

from dpwate.dataset import CausalDataset
from dpwate.simlab import SimulationConfig, simulate_dataset

ACCEPTANCE_LINES = []


def make_data(n=1000, eta=2.0, gamma=1.0, seed=0):
    config = SimulationConfig(n=max(n, 100), eta=eta, gamma=gamma)
    data, truth, e = simulate_dataset(config, seed)
    if n < 100:
        data = data.subset(np.arange(n))
    return data


@pytest.fixture
def sim_data():
    return make_data(2000, seed=11)


@pytest.fixture
def tiny():
    # 6 records: 2 treated, 4 control
    return CausalDataset(
        outcomes=[1, 0, 1, 0, 1, 0],
        treatments=[1, 1, 0, 0, 0, 0],
        covariates=np.zeros((6, 1)),
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
