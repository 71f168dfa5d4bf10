import os

os.environ.setdefault("SWARM_PROGRESS", "0")
os.environ.setdefault("SWARM_LOG_LEVEL", "WARNING")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from swarm_agents.config import HarnessParams, RunConfig, WorldParams  # noqa: E402
from tests.helpers import TINY_TRAIN  # noqa: E402


@pytest.fixture
def params() -> WorldParams:
    return WorldParams()


@pytest.fixture
def default_config() -> RunConfig:
    return RunConfig()


@pytest.fixture
def tiny_config(tmp_path) -> RunConfig:
    """Default scenario with training and horizons shrunk to a few steps."""
    return RunConfig(
        train_alpha=TINY_TRAIN,
        train_beta=TINY_TRAIN,
        harness=HarnessParams(alpha_horizon=8, beta_horizon=8, n_seeds=2),
        output_dir=str(tmp_path / "run"),
    )


@pytest.fixture
def radii(default_config) -> np.ndarray:
    return np.array([spec.radius for spec in default_config.agents])
