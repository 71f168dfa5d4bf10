import json
from pathlib import Path

import pytest

from swarm_agents.config import RunConfig, dump_config, load_config, parse_config
from swarm_agents.exceptions import ConfigError
from swarm_agents.models import Axis, FaultKind, FaultModel

DEFAULT_JSON = Path(__file__).resolve().parents[1] / "configs" / "default.json"


def test_default_config_file_loads():
    config = load_config(DEFAULT_JSON)
    assert config.n_agents == 3
    assert config.fault == FaultModel.actuator_lock(1, Axis.Y)
    assert config.harness.alpha_horizon == 64
    assert config.rewards.theta_work == 0.25
    assert (config.harness.plan_mode, config.harness.plan_samples) == ("stochastic", 16)
    assert config.train_beta.ent_coef == 0.01
    assert config.rewards.beta.credit_remaining_steps


def test_round_trip_is_identity(default_config):
    assert parse_config(dump_config(default_config)) == default_config
    loaded = load_config(DEFAULT_JSON)
    assert parse_config(dump_config(loaded)) == loaded


def test_dump_is_stable(default_config):
    assert dump_config(default_config) == dump_config(parse_config(dump_config(default_config)))


@pytest.mark.parametrize(
    "patch",
    [
        {"unknown": 1},
        {"world": {"arena_size": 10.0, "gravity": 9.8}},
        {"world": {"step_size": -0.1}},
        {"fault": {"kind": "sensor_axis_freeze", "agent": 1}},
        {"fault": {"kind": "actuator_axis_lock", "axis": "y", "agent": 7}},
        {"hypothesis": {"agent": 5, "axis": "x"}},
        {"plot": {"series": []}},
        {"harness": {"plan_mode": "random"}},
    ],
    ids=["top-level", "nested", "range", "missing-axis", "fault-agent", "hypothesis-agent", "no-series", "mode"],
)
def test_invalid_configs_rejected(default_config, patch):
    data = json.loads(dump_config(default_config))
    data.update(patch)
    with pytest.raises(ConfigError):
        parse_config(json.dumps(data))


def test_agent_outside_arena_rejected(default_config):
    data = json.loads(dump_config(default_config))
    data["agents"][0]["start"] = {"x": 0.1, "y": 5.0}
    with pytest.raises(ConfigError):
        parse_config(json.dumps(data))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_with_seed_updates_training_seeds(default_config):
    config = default_config.with_seed(7)
    assert (config.seed, config.train_alpha.seed, config.train_beta.seed) == (7, 7, 7)
    assert default_config.seed == 0


def test_healthy_fault_needs_no_axis():
    config = RunConfig(fault=FaultModel.healthy())
    assert config.fault.kind is FaultKind.HEALTHY


def test_defaults_match_the_shipped_file():
    loaded = load_config(DEFAULT_JSON)
    defaults = RunConfig()
    assert loaded.harness == defaults.harness
    assert loaded.train_beta.ent_coef == defaults.train_beta.ent_coef
    assert loaded.rewards == defaults.rewards
