"""
Hypothesis Engine - Twin virtual worlds and trajectory classification
=====================================================================

The command base keeps one virtual world per hypothesis (actuator lock vs
sensor freeze on the same agent and axis), steps both with the same command
stream, scores how far apart their observed states drift and later decides
which prediction the real trajectory follows.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence, Tuple

import numpy as np

from .config import WorldParams
from .exceptions import TrajectoryError
from .models import Axis, Command, FaultModel, HypothesisLabel, Verdict
from .world_core import Pair, StepRecord, WorldState, step

CLASSIFY_EPS = 1e-12


@dataclass(frozen=True)
class Hypothesis:
    label: HypothesisLabel
    fault: FaultModel


def hypothesis_pair(agent: int, axis: Axis) -> Tuple[Hypothesis, Hypothesis]:
    """(H_a, H_s) for a suspected (agent, axis)."""
    return (
        Hypothesis(HypothesisLabel.H_A, FaultModel.actuator_lock(agent, axis)),
        Hypothesis(HypothesisLabel.H_S, FaultModel.sensor_freeze(agent, axis)),
    )


@dataclass(frozen=True)
class TwinState:
    """Both hypothesis worlds plus the collisions of their last step"""
    world_a: WorldState
    world_s: WorldState
    hypotheses: Tuple[Hypothesis, Hypothesis]
    radii: Tuple[float, ...]
    collisions_a: Tuple[Pair, ...] = ()
    collisions_s: Tuple[Pair, ...] = ()

    def __post_init__(self):
        if self.world_a.tick != self.world_s.tick:
            raise ValueError("Twin worlds out of step")
        fa, fs = self.hypotheses[0].fault, self.hypotheses[1].fault
        if (fa.agent, fa.axis) != (fs.agent, fs.axis):
            raise ValueError("Twin hypotheses must share agent and axis")

    @classmethod
    def initial(cls, observed, radii: Sequence[float], agent: int, axis: Axis, tick: int = 0) -> "TwinState":
        """Both worlds start from the observed state taken as physical truth."""
        world = WorldState.at_rest(observed, tick=tick)
        return cls(world, world, hypothesis_pair(agent, axis), tuple(float(r) for r in radii))

    @property
    def faulty_agent(self) -> int:
        return self.hypotheses[0].fault.agent

    @property
    def tick(self) -> int:
        return self.world_a.tick

    def observation(self) -> np.ndarray:
        return np.concatenate([self.world_a.observed_vector(), self.world_s.observed_vector()])


def observed_distance(world_a: WorldState, world_s: WorldState) -> float:
    return float(np.linalg.norm(world_a.observed.reshape(-1) - world_s.observed.reshape(-1)))


def twin_step_records(twin: TwinState, cmd: Command, params: WorldParams) -> Tuple[TwinState, float, StepRecord, StepRecord]:
    """twin_step that also hands back both step records."""
    hyp_a, hyp_s = twin.hypotheses
    record_a = step(twin.world_a, cmd, [hyp_a.fault], params, twin.radii)
    record_s = step(twin.world_s, cmd, [hyp_s.fault], params, twin.radii)
    nxt = TwinState(
        record_a.post,
        record_s.post,
        twin.hypotheses,
        twin.radii,
        record_a.collisions,
        record_s.collisions,
    )
    return nxt, observed_distance(record_a.post, record_s.post), record_a, record_s


def twin_step(twin: TwinState, cmd: Command, params: WorldParams) -> Tuple[TwinState, float]:
    """Step both worlds from their own prior states; reward is the observed-state distance."""
    nxt, reward, _, _ = twin_step_records(twin, cmd, params)
    return nxt, reward


@dataclass(frozen=True)
class Trajectory:
    """Observed state vectors (2N reals each), one row per tick"""
    states: np.ndarray
    start_tick: int = 0

    def __post_init__(self):
        if self.states.ndim != 2:
            raise TrajectoryError(f"Trajectory must be 2-D, got shape {self.states.shape}")
        self.states.setflags(write=False)

    @classmethod
    def from_states(cls, states: Sequence[WorldState]) -> "Trajectory":
        if not states:
            raise TrajectoryError("Trajectory needs at least one state")
        return cls(np.stack([s.observed_vector() for s in states]), start_tick=states[0].tick)

    @classmethod
    def from_vectors(cls, vectors, start_tick: int = 0) -> "Trajectory":
        return cls(np.array(vectors, dtype=float).reshape(len(vectors), -1), start_tick=start_tick)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def width(self) -> int:
        return self.states.shape[1]

    @property
    def n_agents(self) -> int:
        return self.width // 2

    def agent_path(self, agent: int) -> np.ndarray:
        return self.states[:, 2 * agent:2 * agent + 2]


def _check_compatible(a: Trajectory, b: Trajectory):
    if len(a) != len(b):
        raise TrajectoryError(f"Trajectory lengths differ: {len(a)} vs {len(b)}")
    if a.width != b.width:
        raise TrajectoryError(f"Trajectory widths differ: {a.width} vs {b.width}")


def per_step_divergence(traj_a: Trajectory, traj_s: Trajectory) -> np.ndarray:
    _check_compatible(traj_a, traj_s)
    return np.linalg.norm(traj_a.states - traj_s.states, axis=1)


def divergence_total(traj_a: Trajectory, traj_s: Trajectory) -> float:
    """Sum over time of the per-step Euclidean distance."""
    return float(per_step_divergence(traj_a, traj_s).sum())


def divergence_pairwise(trajectories: Mapping[str, Trajectory]) -> float:
    """Divergence summed over every unordered pair of hypothesis trajectories."""
    return float(sum(divergence_total(a, b) for a, b in combinations(trajectories.values(), 2)))


def score_hypotheses(real: Trajectory, pred_a: Trajectory, pred_s: Trajectory) -> Tuple[float, float]:
    return divergence_total(real, pred_a), divergence_total(real, pred_s)


def classify(real: Trajectory, pred_a: Trajectory, pred_s: Trajectory, margin: float = 0.10) -> Verdict:
    """Closest prediction wins unless the two distances are within the relative margin."""
    d_a, d_s = score_hypotheses(real, pred_a, pred_s)
    if abs(d_a - d_s) <= margin * max(d_a, d_s, CLASSIFY_EPS):
        return Verdict.INCONCLUSIVE
    return Verdict.H_A if d_a < d_s else Verdict.H_S


def first_divergence_tick(divergence: Sequence[float]) -> int:
    """Index of the first strictly positive entry, or -1."""
    positive = np.flatnonzero(np.asarray(divergence) > 0.0)
    return int(positive[0]) if positive.size else -1


def collision_precedes_divergence(
    divergence: Sequence[float],
    collisions_a: Sequence[Sequence[Pair]],
    collisions_s: Sequence[Sequence[Pair]],
    agent: int,
) -> bool:
    """
    divergence[t] is measured at tick t (tick 0 included) and collisions_*[t]
    lists the pairs separated while producing tick t. True when no divergence
    appears or a collision involving the agent happens at or before the first
    divergent tick in either world.
    """
    first = first_divergence_tick(divergence)
    if first < 0:
        return True
    for t in range(first + 1):
        pairs = list(collisions_a[t]) + list(collisions_s[t])
        if any(agent in pair for pair in pairs):
            return True
    return False
