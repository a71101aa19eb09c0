import math

import numpy as np
import pytest

from tpace.data import TrialDataset
from tpace.simulate import SimConfig, simulate_trial


def make_dataset(rows):
    """rows: (id, arm, onset or None, time, event, cutoff)"""
    return TrialDataset(
        ids=[r[0] for r in rows],
        experimental=[r[1] == "E" for r in rows],
        onset=[math.nan if r[2] is None else r[2] for r in rows],
        time=[r[3] for r in rows],
        event=[r[4] for r in rows],
        cutoff=[r[5] for r in rows],
    )


def small_config(seed, **overrides):
    base = dict(
        n_experimental=120,
        n_control=80,
        hazard_control_phase_a=0.06,
        hazard_control_phase_b=0.07,
        hr_phase_a=0.85,
        hr_phase_b=0.5,
        maintenance_entry=0.5,
        combination_param=math.log(2) / 6,
        accrual_window=20.0,
        followup_cutoff=40.0,
        dropout_rate=0.005,
        master_seed=seed,
    )
    base.update(overrides)
    return SimConfig(**base)


@pytest.fixture
def tiny():
    return make_dataset([
        ("S001", "E", 6.0, 10.0, 1, 24.0),
        ("S002", "C", None, 12.6, 1, 24.0),
        ("S003", "E", None, 3.5, 1, 24.0),
        ("S004", "C", 5.0, 9.0, 1, 24.0),
        ("S005", "E", 4.0, 24.0, 0, 24.0),
        ("S006", "C", 7.0, 15.0, 0, 20.0),
    ])


@pytest.fixture(scope="session")
def sim_trial():
    return simulate_trial(small_config(11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
