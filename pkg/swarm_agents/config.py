"""
Run-config for the Swarm Diagnosis System
=========================================

One JSON document describes a whole run: arena, agents, the real world's
fault, reward shaping, both training stages and the harness. Every section
rejects unknown keys.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError
from .models import AgentSpec, Axis, FaultModel, Vec2


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class WorldParams(_Section):
    """Arena geometry and solver constants"""
    arena_size: float = Field(default=10.0, gt=0)
    step_size: float = Field(default=0.25, gt=0)
    collision_passes: int = Field(default=8, ge=1)
    overlap_tol: float = Field(default=1e-9, ge=0)
    obs_noise_sigma: float = Field(default=0.0, ge=0)
    # above this agent count the collision solver uses the uniform grid
    broadphase_threshold: int = Field(default=64, ge=2)


class TrainConfig(_Section):
    """PPO hyperparameters for one training stage"""
    gamma: float = Field(default=0.99, gt=0, le=1)
    gae_lambda: float = Field(default=0.95, ge=0, le=1)
    clip_eps: float = Field(default=0.2, gt=0)
    learning_rate: float = Field(default=3e-4, gt=0)
    epochs: int = Field(default=10, ge=1)
    minibatch_size: int = Field(default=64, ge=1)
    rollout_len: int = Field(default=2048, ge=1)
    total_steps: int = Field(default=200_000, ge=1)
    seed: int = 0
    ent_coef: float = Field(default=0.0, ge=0)
    vf_coef: float = Field(default=0.5, ge=0)
    max_grad_norm: float = Field(default=0.5, gt=0)
    hidden_sizes: Tuple[int, ...] = (64, 64)


class BetaRewardSpec(_Section):
    """Conveyance reward: proximity term plus arrival and completion bonuses"""
    proximity_weight: float = Field(default=1.0, gt=0)
    arrive_bonus: float = Field(default=10.0, gt=0)
    done_bonus: float = Field(default=50.0, gt=0)
    goal_radius: float = Field(default=0.5, gt=0)
    # on completion, credit the steps left in the horizon at the completion proximity
    credit_remaining_steps: bool = True


class RewardsConfig(_Section):
    beta: BetaRewardSpec = BetaRewardSpec()
    theta_work: float = 0.25
    margin: float = Field(default=0.10, ge=0, le=1)


class HypothesisConfig(_Section):
    """Optional override of the (agent, axis) pair otherwise taken from the probe"""
    agent: Optional[int] = Field(default=None, ge=0)
    axis: Optional[Axis] = None


class HarnessParams(_Section):
    alpha_horizon: int = Field(default=64, ge=1)
    beta_horizon: int = Field(default=256, ge=1)
    plan_mode: Literal["greedy", "stochastic"] = "stochastic"
    # seeded stochastic rollouts scored in virtual space; the best one becomes the plan
    plan_samples: int = Field(default=16, ge=1)
    n_seeds: int = Field(default=20, ge=1)
    workers: int = Field(default=1, ge=1)


SeriesName = Literal["real", "pred_a", "pred_s"]


class PlotSpec(_Section):
    """Which trajectories to draw and how"""
    series: List[SeriesName] = Field(default_factory=lambda: ["pred_a", "pred_s"], min_length=1)
    colors: Dict[str, str] = Field(
        default_factory=lambda: {"real": "#2c3e50", "pred_a": "#e74c3c", "pred_s": "#3498db"}
    )
    show_collisions: bool = True
    show_goals: bool = True


def _default_agents() -> List[AgentSpec]:
    starts = [(2.5, 2.5), (5.0, 2.5), (7.5, 2.5)]
    goals = [(2.5, 7.5), (5.0, 7.5), (7.5, 7.5)]
    return [
        AgentSpec(id=idx, radius=0.5, start=Vec2(x=s[0], y=s[1]), goal=Vec2(x=g[0], y=g[1]))
        for idx, (s, g) in enumerate(zip(starts, goals))
    ]


class RunConfig(_Section):
    """Complete, validated description of a run"""
    world: WorldParams = WorldParams()
    agents: List[AgentSpec] = Field(default_factory=_default_agents, min_length=1)
    fault: FaultModel = FaultModel.actuator_lock(1, Axis.Y)
    hypothesis: HypothesisConfig = HypothesisConfig()
    rewards: RewardsConfig = RewardsConfig()
    train_alpha: TrainConfig = TrainConfig()
    train_beta: TrainConfig = TrainConfig(ent_coef=0.01)
    harness: HarnessParams = HarnessParams()
    plot: PlotSpec = PlotSpec()
    output_dir: str = "runs/default"
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        ids = [spec.id for spec in self.agents]
        if ids != list(range(len(ids))):
            raise ValueError(f"agent ids must be contiguous from 0, got {ids}")
        n_agents = len(self.agents)
        if self.fault.agent >= n_agents:
            raise ValueError(f"fault agent {self.fault.agent} out of range for {n_agents} agents")
        if self.hypothesis.agent is not None and self.hypothesis.agent >= n_agents:
            raise ValueError(f"hypothesis agent {self.hypothesis.agent} out of range")
        size = self.world.arena_size
        for spec in self.agents:
            for point in (spec.start, spec.goal):
                if not (spec.radius <= point.x <= size - spec.radius and spec.radius <= point.y <= size - spec.radius):
                    raise ValueError(f"agent {spec.id} point {point.as_tuple()} outside the arena")
        return self

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with the run seed and both training seeds replaced."""
        return self.model_copy(update={
            "seed": seed,
            "train_alpha": self.train_alpha.model_copy(update={"seed": seed}),
            "train_beta": self.train_beta.model_copy(update={"seed": seed}),
        })

    def with_fault(self, fault: FaultModel) -> "RunConfig":
        return self.model_copy(update={"fault": fault})

    def with_output_dir(self, output_dir: Union[str, Path]) -> "RunConfig":
        return self.model_copy(update={"output_dir": str(output_dir)})


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"Invalid run-config: {e}") from e


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Run-config not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def dump_config(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True)
