"""
Shared Models for the Swarm Diagnosis System
============================================

Enums and pydantic records used across the system: agent and fault
descriptions, commands, probe reports and every record written to disk.
"""

from __future__ import annotations

import math
from enum import Enum, IntEnum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Action(IntEnum):
    """Per-agent discrete action"""
    STAY = 0
    PLUS_X = 1
    MINUS_X = 2
    PLUS_Y = 3
    MINUS_Y = 4

    @property
    def label(self) -> str:
        return ACTION_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Action":
        for action, name in ACTION_LABELS.items():
            if name == label:
                return action
        raise ValueError(f"Unknown action label: {label}")


ACTION_LABELS = {
    Action.STAY: "stay",
    Action.PLUS_X: "+x",
    Action.MINUS_X: "-x",
    Action.PLUS_Y: "+y",
    Action.MINUS_Y: "-y",
}

N_ACTIONS = len(Action)


class Axis(str, Enum):
    X = "x"
    Y = "y"

    @property
    def index(self) -> int:
        return 0 if self is Axis.X else 1

    def plus(self) -> Action:
        return Action.PLUS_X if self is Axis.X else Action.PLUS_Y

    def minus(self) -> Action:
        return Action.MINUS_X if self is Axis.X else Action.MINUS_Y


class FaultKind(str, Enum):
    HEALTHY = "healthy"
    ACTUATOR_AXIS_LOCK = "actuator_axis_lock"
    SENSOR_AXIS_FREEZE = "sensor_axis_freeze"


class HypothesisLabel(str, Enum):
    H_A = "H_a"
    H_S = "H_s"


class Verdict(str, Enum):
    H_A = "H_a"
    H_S = "H_s"
    INCONCLUSIVE = "Inconclusive"


class AxisStatus(str, Enum):
    RESPONSIVE = "responsive"
    UNRESPONSIVE = "unresponsive"


# Base Models (defined first to avoid forward references)
class Vec2(BaseModel):
    """Point on the arena plane"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    x: float
    y: float

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coordinates must be finite")
        return value

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


class AgentSpec(BaseModel):
    """Static description of one agent"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=0)
    radius: float = Field(gt=0)
    start: Vec2
    goal: Vec2


class FaultModel(BaseModel):
    """Fault carried by one agent"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: FaultKind = FaultKind.HEALTHY
    axis: Optional[Axis] = None
    agent: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _axis_present(self) -> "FaultModel":
        if self.kind is not FaultKind.HEALTHY and self.axis is None:
            raise ValueError(f"{self.kind.value} fault needs an axis")
        return self

    @classmethod
    def healthy(cls, agent: int = 0) -> "FaultModel":
        return cls(kind=FaultKind.HEALTHY, agent=agent)

    @classmethod
    def actuator_lock(cls, agent: int, axis: Axis) -> "FaultModel":
        return cls(kind=FaultKind.ACTUATOR_AXIS_LOCK, axis=axis, agent=agent)

    @classmethod
    def sensor_freeze(cls, agent: int, axis: Axis) -> "FaultModel":
        return cls(kind=FaultKind.SENSOR_AXIS_FREEZE, axis=axis, agent=agent)

    @property
    def is_healthy(self) -> bool:
        return self.kind is FaultKind.HEALTHY


class Command(BaseModel):
    """One action per agent, issued by the command base"""
    model_config = ConfigDict(frozen=True)

    actions: Tuple[Action, ...]

    @classmethod
    def stay(cls, n_agents: int) -> "Command":
        return cls(actions=(Action.STAY,) * n_agents)

    @classmethod
    def single(cls, n_agents: int, agent: int, action: Action) -> "Command":
        actions = [Action.STAY] * n_agents
        actions[agent] = action
        return cls(actions=tuple(actions))

    @classmethod
    def from_indices(cls, indices) -> "Command":
        return cls(actions=tuple(Action(int(i)) for i in indices))

    @classmethod
    def from_labels(cls, labels: List[str]) -> "Command":
        return cls(actions=tuple(Action.from_label(label) for label in labels))

    def labels(self) -> List[str]:
        return [action.label for action in self.actions]

    def __len__(self) -> int:
        return len(self.actions)


# Probe Models
class AgentProbe(BaseModel):
    """Probe outcome for one agent"""
    agent: int
    x: AxisStatus
    y: AxisStatus
    probe_step: float

    def status(self, axis: Axis) -> AxisStatus:
        return self.x if axis is Axis.X else self.y


class FaultReport(BaseModel):
    """Responsive / unresponsive flags per agent and axis"""
    agents: List[AgentProbe]

    def unresponsive(self) -> List[Tuple[int, Axis]]:
        return [
            (probe.agent, axis)
            for probe in self.agents
            for axis in Axis
            if probe.status(axis) is AxisStatus.UNRESPONSIVE
        ]

    @property
    def is_healthy(self) -> bool:
        return not self.unresponsive()

    def flags(self) -> List[Tuple[AxisStatus, AxisStatus]]:
        """Comparable view that ignores the probe step actually used."""
        return [(probe.x, probe.y) for probe in self.agents]


# Trace Models (one JSON object per line)
class StepLine(BaseModel):
    tick: int
    command: List[str]
    physical: List[List[float]]
    observed: List[List[float]]
    collisions: List[List[int]]


class TrajectoryLine(BaseModel):
    tick: int
    state: List[float]


class PlanFile(BaseModel):
    """Open-loop plan as stored on disk"""
    stage: str
    mode: str
    seed: int
    checkpoint_id: str
    commands: List[List[str]]


class CurveRow(BaseModel):
    """One row of a training curve"""
    update: int
    env_steps: int
    mean_episode_reward: float
    policy_loss: float
    value_loss: float
    kl: float


# Report Models
class MissionReport(BaseModel):
    """Outcome of one pipeline run"""
    status: str
    seed: int
    fault_report: FaultReport
    hypothesis_agent: Optional[int] = None
    hypothesis_axis: Optional[Axis] = None
    verdict: Verdict = Verdict.INCONCLUSIVE
    distance_a: Optional[float] = None
    distance_s: Optional[float] = None
    divergence_total: Optional[float] = None
    divergence_max: Optional[float] = None
    arrival_ticks: List[Optional[int]] = Field(default_factory=list)
    arrived: List[bool] = Field(default_factory=list)
    mission_success: bool = False
    push_only_motion: Optional[bool] = None
    wall_time_s: float = 0.0
    artifacts: Dict[str, str] = Field(default_factory=dict)


class SeedRecord(BaseModel):
    """Per-seed outcome of the success-rate harness"""
    seed: int
    working: bool
    max_divergence: float
    total_divergence: float
    verdict_real_ha: Verdict
    verdict_real_hs: Verdict
    collision_precedes_divergence: bool


class SuccessRateReport(BaseModel):
    theta_work: float
    n_seeds: int
    rate: float
    records: List[SeedRecord]


class BenchRow(BaseModel):
    n: int
    method: str
    median_ns: int
