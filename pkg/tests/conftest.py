"""Shared fixtures.

Most unit tests build their inputs inline; the fixtures here cover the two
expensive things worth sharing per session: a generated scenario directory
and an environment wired to it.
"""

from datetime import datetime
from pathlib import Path

import numpy as np
import pytest

from hemslab.scenario import Scenario, load_scenario
from hemslab.synth import generate_scenario
from hemslab.timeseries import TimeGrid


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("scn")
    generate_scenario(out, days=8, holdout_days=2, seed=11)
    return out


@pytest.fixture(scope="session")
def scenario(scenario_dir) -> Scenario:
    return load_scenario(scenario_dir / "scenario.ini")


@pytest.fixture()
def env(scenario):
    return scenario.build_environment()


@pytest.fixture()
def grid() -> TimeGrid:
    return TimeGrid(origin=datetime(2021, 6, 1), step_minutes=15, steps_per_episode=192)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(123)
