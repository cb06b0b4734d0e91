import numpy as np
import pytest

from swmlab.cli.config import ExperimentConfig
from swmlab.envs.base import make_env
from swmlab.envs.facility import FacilityConfig, TraitClass


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_facility_cfg():
    """3x3 grid, 2 agents, 2 facilities: big enough to exercise everything."""
    return FacilityConfig(
        grid_side=3,
        n_agents=2,
        n_facilities=2,
        trait_params=(TraitClass(4.0, 0.0, 1.0), TraitClass(1.0, 8.0, 1.0)),
    )


@pytest.fixture
def small_facility_env(small_facility_cfg):
    env = make_env("facility", small_facility_cfg)
    return env


@pytest.fixture
def default_cfg():
    cfg = ExperimentConfig()
    cfg.validate()
    return cfg
