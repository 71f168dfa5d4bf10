"""
World Core - Deterministic 2-D arena with rigid-disk agents
===========================================================

Agents are disks on a square arena driven by per-agent discrete commands.
Each step applies the commanded displacements (masked by actuator locks),
separates overlapping disks with an iterative positional solver, clamps to
the arena and derives the base-visible state through the sensor masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig, WorldParams
from .exceptions import CommandError, ConfigError, GeometryError
from .models import (
    AgentProbe,
    AgentSpec,
    Axis,
    AxisStatus,
    Command,
    FaultKind,
    FaultModel,
    FaultReport,
    StepLine,
)
from .settings import get_logger
from .spatial_index import build, near_pairs

logger = get_logger("world_core")

# Unit displacement per Action index
ACTION_VECTORS = np.array(
    [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class WorldState:
    """Physical truth, base-observed positions and the step counter"""
    physical: np.ndarray
    observed: np.ndarray
    tick: int = 0

    def __post_init__(self):
        self.physical.setflags(write=False)
        self.observed.setflags(write=False)

    @classmethod
    def at_rest(cls, positions, tick: int = 0) -> "WorldState":
        positions = np.array(positions, dtype=float).reshape(-1, 2)
        return cls(physical=positions.copy(), observed=positions.copy(), tick=tick)

    @property
    def n_agents(self) -> int:
        return self.physical.shape[0]

    def observed_vector(self) -> np.ndarray:
        return self.observed.reshape(-1).copy()


@dataclass(frozen=True)
class StepRecord:
    command: Command
    pre: WorldState
    post: WorldState
    collisions: Tuple[Pair, ...] = ()
    degenerate: Tuple[Pair, ...] = field(default=())

    def involves(self, agent: int) -> bool:
        return any(agent in pair for pair in self.collisions)

    def to_line(self) -> StepLine:
        return StepLine(
            tick=self.post.tick,
            command=self.command.labels(),
            physical=self.post.physical.tolist(),
            observed=self.post.observed.tolist(),
            collisions=[list(pair) for pair in self.collisions],
        )


def collision_events(records: Iterable[StepRecord]) -> List[Tuple[int, Pair]]:
    """(tick, pair) for every collision, stamped with the world tick the step produced."""
    return [(record.post.tick, pair) for record in records for pair in record.collisions]


class CollisionResult(NamedTuple):
    positions: np.ndarray
    pairs: Tuple[Pair, ...]
    degenerate: Tuple[Pair, ...]


def fault_masks(faults: Iterable[FaultModel], n_agents: int) -> Tuple[np.ndarray, np.ndarray]:
    """Boolean (N, 2) masks of actuator-locked and sensor-frozen coordinates."""
    actuator = np.zeros((n_agents, 2), dtype=bool)
    sensor = np.zeros((n_agents, 2), dtype=bool)
    seen = set()
    for fault in faults:
        if fault.is_healthy:
            continue
        if fault.agent >= n_agents:
            raise ConfigError(f"Fault on agent {fault.agent} but only {n_agents} agents")
        if fault.agent in seen:
            raise ConfigError(f"More than one fault on agent {fault.agent}")
        seen.add(fault.agent)
        if fault.kind is FaultKind.ACTUATOR_AXIS_LOCK:
            actuator[fault.agent, fault.axis.index] = True
        else:
            sensor[fault.agent, fault.axis.index] = True
    return actuator, sensor


def _candidate_pairs(positions: np.ndarray, radii: np.ndarray, params: WorldParams) -> List[Pair]:
    n_agents = positions.shape[0]
    if n_agents <= params.broadphase_threshold:
        return [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)]
    cutoff = 2.0 * float(radii.max())
    return near_pairs(build(positions, cutoff, radii=radii), cutoff)


def resolve_collisions(positions, radii, params: WorldParams) -> CollisionResult:
    """
    Push overlapping disks apart along their center line.

    Each of the K passes visits pairs in ascending index order and moves both
    agents by half the overlap. Coincident centers are separated along +x and
    reported as degenerate.
    """
    positions = np.array(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if not np.all(np.isfinite(positions)):
        raise GeometryError("Non-finite agent positions")

    separated = set()
    degenerate = set()
    for _ in range(params.collision_passes):
        moved = False
        for i, j in _candidate_pairs(positions, radii, params):
            delta = positions[j] - positions[i]
            dist = float(np.hypot(delta[0], delta[1]))
            overlap = radii[i] + radii[j] - dist
            if overlap <= params.overlap_tol:
                continue
            if dist > 0.0:
                normal = delta / dist
            else:
                normal = np.array([1.0, 0.0])
                degenerate.add((i, j))
            positions[i] -= normal * (overlap / 2.0)
            positions[j] += normal * (overlap / 2.0)
            separated.add((i, j))
            moved = True
        if not moved:
            break

    return CollisionResult(positions, tuple(sorted(separated)), tuple(sorted(degenerate)))


def step(
    state: WorldState,
    cmd: Command,
    faults: Sequence[FaultModel],
    params: WorldParams,
    radii,
    rng: Optional[np.random.Generator] = None,
) -> StepRecord:
    """Advance one tick under the given faults."""
    n_agents = state.n_agents
    if len(cmd) != n_agents:
        raise CommandError(f"Command has {len(cmd)} actions for {n_agents} agents")
    radii = np.asarray(radii, dtype=float)
    actuator, sensor = fault_masks(faults, n_agents)

    indices = np.fromiter((int(a) for a in cmd.actions), dtype=int, count=n_agents)
    displacement = params.step_size * ACTION_VECTORS[indices]
    displacement[actuator] = 0.0

    result = resolve_collisions(state.physical + displacement, radii, params)
    low = radii[:, None]
    high = params.arena_size - radii[:, None]
    physical = np.clip(result.positions, low, high)

    observed = np.where(sensor, state.observed, physical)
    if params.obs_noise_sigma > 0.0 and rng is not None:
        noise = rng.normal(0.0, params.obs_noise_sigma, size=observed.shape)
        observed = np.where(sensor, observed, observed + noise)

    post = WorldState(physical=physical, observed=observed, tick=state.tick + 1)
    return StepRecord(cmd, state, post, result.pairs, result.degenerate)


def has_overlap(positions, radii, tol: float = 1e-9) -> bool:
    positions = np.asarray(positions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    for i in range(len(radii)):
        for j in range(i + 1, len(radii)):
            if radii[i] + radii[j] - np.linalg.norm(positions[j] - positions[i]) > tol:
                return True
    return False


class RealWorld:
    """
    The agents as seen from the command base: faults are hidden, only
    commands go in and observed positions come out.
    """

    def __init__(
        self,
        specs: Sequence[AgentSpec],
        faults: Sequence[FaultModel],
        params: WorldParams,
        seed: int = 0,
        positions=None,
    ):
        self.params = params
        self.radii = np.array([spec.radius for spec in specs], dtype=float)
        self._faults = tuple(faults)
        fault_masks(self._faults, len(specs))
        start = positions if positions is not None else [spec.start.as_tuple() for spec in specs]
        self._state = WorldState.at_rest(start)
        self._rng = np.random.default_rng(seed)
        self.records: List[StepRecord] = []

    @classmethod
    def from_config(cls, config: RunConfig, positions=None) -> "RealWorld":
        return cls(config.agents, [config.fault], config.world, seed=config.seed, positions=positions)

    @property
    def n_agents(self) -> int:
        return self._state.n_agents

    @property
    def tick(self) -> int:
        return self._state.tick

    @property
    def observed(self) -> np.ndarray:
        return self._state.observed.copy()

    @property
    def state(self) -> WorldState:
        return self._state

    def restore(self, snapshot: WorldState):
        """Put every agent back where the snapshot had it; the tick keeps counting."""
        self._state = WorldState(physical=snapshot.physical.copy(), observed=snapshot.observed.copy(), tick=self.tick)

    def apply(self, cmd: Command, step_size: Optional[float] = None) -> StepRecord:
        params = self.params
        if step_size is not None:
            params = params.model_copy(update={"step_size": step_size})
        record = step(self._state, cmd, self._faults, params, self.radii, rng=self._rng)
        self._state = record.post
        self.records.append(record)
        return record


def probe(world: RealWorld, params: WorldParams, max_retries: int = 3) -> FaultReport:
    """
    Move every agent by +step then -step along each axis and flag the axes
    whose observed displacement stays below half a step both times.
    """
    if has_overlap(world.observed, world.radii):
        raise GeometryError("Probe needs a world at rest without overlaps")

    n_agents = world.n_agents
    probes = []
    for agent in range(n_agents):
        flags = {}
        used_step = params.step_size
        for axis in Axis:
            probe_step = params.step_size
            snapshot = world.state
            for attempt in range(max_retries + 1):
                before = world.observed[agent, axis.index]
                forward = world.apply(Command.single(n_agents, agent, axis.plus()), step_size=probe_step)
                middle = world.observed[agent, axis.index]
                backward = world.apply(Command.single(n_agents, agent, axis.minus()), step_size=probe_step)
                after = world.observed[agent, axis.index]
                if not (forward.collisions or backward.collisions):
                    break
                logger.warning(f"Probe of agent {agent} axis {axis.value} collided, retrying with step {probe_step / 2}")
                world.restore(snapshot)
                probe_step /= 2.0
            else:
                raise GeometryError(f"Probe of agent {agent} axis {axis.value} keeps colliding")

            unresponsive = abs(middle - before) < probe_step / 2 and abs(after - middle) < probe_step / 2
            flags[axis] = AxisStatus.UNRESPONSIVE if unresponsive else AxisStatus.RESPONSIVE
            used_step = min(used_step, probe_step)
            if unresponsive:
                logger.info(f"Probe flagged agent {agent} axis {axis.value}")

        probes.append(AgentProbe(agent=agent, x=flags[Axis.X], y=flags[Axis.Y], probe_step=used_step))

    return FaultReport(agents=probes)
