"""
Training environments for the two mission stages.

TwinEnv rewards divergence between the hypothesis worlds (plan alpha);
ConveyanceEnv rewards bringing every agent to its goal under the identified
fault (plan beta).
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .config import BetaRewardSpec, WorldParams
from .hypothesis_engine import TwinState, twin_step_records
from .models import Command, FaultModel
from .world_core import StepRecord, WorldState, step


def goal_distances(state: WorldState, goals: np.ndarray) -> np.ndarray:
    """Observed distance of every agent to its goal."""
    return np.linalg.norm(state.observed - goals, axis=1)


def arrived_mask(state: WorldState, goals: np.ndarray, spec: BetaRewardSpec) -> np.ndarray:
    return goal_distances(state, goals) <= spec.goal_radius


def beta_reward(state: WorldState, arrivals: Sequence[bool], spec: BetaRewardSpec, goals) -> float:
    """
    Proximity term sum_j w_p / (1 + d_j), plus the arrival bonus for agents
    entering their goal radius for the first time, plus the completion bonus
    on the step where the last agent arrives. `arrivals` are the latched flags
    before this state.
    """
    goals = np.asarray(goals, dtype=float).reshape(-1, 2)
    previous = np.asarray(arrivals, dtype=bool)
    distances = goal_distances(state, goals)
    reward = float(np.sum(spec.proximity_weight / (1.0 + distances)))

    now = previous | (distances <= spec.goal_radius)
    reward += spec.arrive_bonus * int(np.count_nonzero(now & ~previous))
    if now.all() and not previous.all():
        reward += spec.done_bonus
    return reward


def remaining_credit(state: WorldState, goals, spec: BetaRewardSpec, steps_left: int) -> float:
    """Proximity the completed formation would keep earning for the steps left in the horizon."""
    if not spec.credit_remaining_steps or steps_left <= 0:
        return 0.0
    distances = goal_distances(state, np.asarray(goals, dtype=float).reshape(-1, 2))
    return float(np.sum(spec.proximity_weight / (1.0 + distances))) * steps_left


class TwinEnv:
    """Episodes of fixed length from one initial twin; observation is both observed vectors."""

    def __init__(self, initial: TwinState, params: WorldParams, horizon: int):
        self.initial = initial
        self.params = params
        self.horizon = horizon
        self.n_agents = initial.world_a.n_agents
        self.obs_dim = 4 * self.n_agents
        self.twin = initial
        self.t = 0
        self.last_records: Optional[Tuple[StepRecord, StepRecord]] = None

    def _obs(self) -> np.ndarray:
        return self.twin.observation() / self.params.arena_size

    def reset(self) -> np.ndarray:
        self.twin = self.initial
        self.t = 0
        self.last_records = None
        return self._obs()

    def step(self, action_indices) -> Tuple[np.ndarray, float, bool]:
        cmd = Command.from_indices(action_indices)
        self.twin, reward, record_a, record_s = twin_step_records(self.twin, cmd, self.params)
        self.last_records = (record_a, record_s)
        self.t += 1
        return self._obs(), reward, self.t >= self.horizon


class ConveyanceEnv:
    """Conveyance to goal posts under one assumed fault"""

    def __init__(
        self,
        initial: WorldState,
        fault: FaultModel,
        radii: Sequence[float],
        goals,
        params: WorldParams,
        spec: BetaRewardSpec,
        horizon: int,
    ):
        self.initial = initial
        self.fault = fault
        self.radii = np.asarray(radii, dtype=float)
        self.goals = np.asarray(goals, dtype=float).reshape(-1, 2)
        self.params = params
        self.spec = spec
        self.horizon = horizon
        self.n_agents = initial.n_agents
        self.obs_dim = 2 * self.n_agents
        self.state = initial
        self.arrivals = np.zeros(self.n_agents, dtype=bool)
        self.t = 0
        self.last_record: Optional[StepRecord] = None

    def _obs(self) -> np.ndarray:
        return self.state.observed_vector() / self.params.arena_size

    def reset(self) -> np.ndarray:
        self.state = self.initial
        self.arrivals = np.zeros(self.n_agents, dtype=bool)
        self.t = 0
        self.last_record = None
        return self._obs()

    def step(self, action_indices) -> Tuple[np.ndarray, float, bool]:
        cmd = Command.from_indices(action_indices)
        record = step(self.state, cmd, [self.fault], self.params, self.radii)
        reward = beta_reward(record.post, self.arrivals, self.spec, self.goals)
        self.arrivals = self.arrivals | arrived_mask(record.post, self.goals, self.spec)
        self.state = record.post
        self.last_record = record
        self.t += 1
        completed = bool(self.arrivals.all())
        if completed:
            reward += remaining_credit(self.state, self.goals, self.spec, self.horizon - self.t)
        return self._obs(), reward, completed or self.t >= self.horizon
