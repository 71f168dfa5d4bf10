"""
Mission Pipeline - Probe, diagnose, then convey
===============================================

Orchestrates the command base workflow:

  [0a] probe every agent and find the unresponsive axis
  [0b] prepare one virtual world per hypothesis
  [1]  train the alpha policy on the twin worlds and record plan alpha
  [2]  run plan alpha on the real agents and classify the hypothesis
  [3]  train the beta policy under the identified fault
  [4]  run plan beta on the real agents

plus the multi-seed success-rate harness.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import BetaRewardSpec, RunConfig, TrainConfig, WorldParams
from .environments import ConveyanceEnv, TwinEnv, arrived_mask, beta_reward
from .exceptions import ConfigError, PlanError
from .hypothesis_engine import (
    Trajectory,
    TwinState,
    classify,
    collision_precedes_divergence,
    divergence_total,
    per_step_divergence,
    score_hypotheses,
)
from .models import (
    Axis,
    Command,
    FaultModel,
    FaultReport,
    MissionReport,
    PlanFile,
    SeedRecord,
    SuccessRateReport,
    Verdict,
)
from .plotting import emit_plot
from .rl_engine import PolicyModel, TrainResult, forward, greedy_indices, sample_indices, save_checkpoint, train_ppo
from .settings import get_logger
from .trace_io import write_curve, write_plan, write_report, write_step_trace, write_summary, write_trajectory
from .world_core import Pair, RealWorld, StepRecord, WorldState, collision_events, probe

logger = get_logger("mission_pipeline")

__all__ = [
    "Plan",
    "AlphaRollout",
    "BetaRollout",
    "Execution",
    "beta_reward",
    "train_alpha",
    "train_beta",
    "make_plan",
    "execute_plan",
    "run_pipeline",
    "success_rate",
]


@dataclass(frozen=True)
class Plan:
    """Open-loop command sequence recorded from a policy rollout"""
    stage: str
    commands: Tuple[Command, ...]
    seed: int
    checkpoint_id: str
    mode: str = "greedy"

    def __len__(self) -> int:
        return len(self.commands)

    def to_file(self) -> PlanFile:
        return PlanFile(
            stage=self.stage,
            mode=self.mode,
            seed=self.seed,
            checkpoint_id=self.checkpoint_id,
            commands=[cmd.labels() for cmd in self.commands],
        )

    @classmethod
    def from_file(cls, plan: PlanFile) -> "Plan":
        return cls(
            stage=plan.stage,
            commands=tuple(Command.from_labels(labels) for labels in plan.commands),
            seed=plan.seed,
            checkpoint_id=plan.checkpoint_id,
            mode=plan.mode,
        )


@dataclass
class AlphaRollout:
    plan: Plan
    pred_a: Trajectory
    pred_s: Trajectory
    divergence: np.ndarray
    records_a: List[StepRecord]
    records_s: List[StepRecord]

    def collisions_by_tick(self, which: str) -> List[Tuple[Pair, ...]]:
        """Index t holds the pairs separated while producing tick t (t = 0 is empty)."""
        records = self.records_a if which == "a" else self.records_s
        return [()] + [record.collisions for record in records]

    @property
    def max_divergence(self) -> float:
        return float(self.divergence.max())


@dataclass
class BetaRollout:
    plan: Plan
    predicted: Trajectory
    records: List[StepRecord]
    rewards: List[float] = field(default_factory=list)
    arrivals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


@dataclass
class Execution:
    trajectory: Trajectory
    records: List[StepRecord]


def resolve_hypothesis(config: RunConfig, fault_report: Optional[FaultReport] = None) -> Tuple[int, Axis]:
    """(agent, axis) under suspicion: explicit override, else probe result, else the configured fault."""
    if config.hypothesis.agent is not None and config.hypothesis.axis is not None:
        return config.hypothesis.agent, config.hypothesis.axis
    if fault_report is not None:
        suspects = fault_report.unresponsive()
        if suspects:
            if len(suspects) > 1:
                logger.warning(f"Probe flagged {len(suspects)} axes, diagnosing the first: {suspects[0]}")
            return suspects[0]
    if not config.fault.is_healthy:
        return config.fault.agent, config.fault.axis
    raise ConfigError("No suspected (agent, axis): configure a hypothesis or a fault")


def verdict_fault(verdict: Verdict, agent: int, axis: Axis) -> FaultModel:
    if verdict is Verdict.H_A:
        return FaultModel.actuator_lock(agent, axis)
    if verdict is Verdict.H_S:
        return FaultModel.sensor_freeze(agent, axis)
    raise PlanError("No fault model for an inconclusive verdict")


def agent_radii(config: RunConfig) -> np.ndarray:
    return np.array([spec.radius for spec in config.agents], dtype=float)


def goal_positions(config: RunConfig) -> np.ndarray:
    return np.array([spec.goal.as_tuple() for spec in config.agents], dtype=float)


def start_positions(config: RunConfig) -> np.ndarray:
    return np.array([spec.start.as_tuple() for spec in config.agents], dtype=float)


def train_alpha(twin: TwinState, cfg: TrainConfig, params: WorldParams, horizon: int) -> TrainResult:
    """PPO on the twin environment; reward is the observed divergence."""
    logger.info(f"Training alpha policy for {cfg.total_steps} steps (seed {cfg.seed})")
    return train_ppo(TwinEnv(twin, params, horizon), cfg, desc="alpha")


def conveyance_env(
    config: RunConfig,
    observed,
    fault: FaultModel,
    horizon: Optional[int] = None,
    tick: int = 0,
) -> ConveyanceEnv:
    """Virtual world for stage beta, seeded from an observed state."""
    return ConveyanceEnv(
        initial=WorldState.at_rest(np.asarray(observed, dtype=float).reshape(-1, 2), tick=tick),
        fault=fault,
        radii=agent_radii(config),
        goals=goal_positions(config),
        params=config.world,
        spec=config.rewards.beta,
        horizon=config.harness.beta_horizon if horizon is None else horizon,
    )


def train_beta(env: ConveyanceEnv, cfg: TrainConfig, verdict: Verdict = Verdict.H_A) -> TrainResult:
    if verdict is Verdict.INCONCLUSIVE:
        raise PlanError("Stage beta needs an identified hypothesis")
    logger.info(f"Training beta policy for {cfg.total_steps} steps under {env.fault.kind.value}")
    return train_ppo(env, cfg, desc="beta")


def _rollout(model: PolicyModel, env, horizon: int, mode: str, rng: np.random.Generator):
    obs = env.reset()
    commands, rewards, records = [], [], []
    for _ in range(horizon):
        logits, _ = forward(model, obs)
        indices = greedy_indices(logits) if mode == "greedy" else sample_indices(logits, rng)[0]
        obs, reward, done = env.step(indices)
        commands.append(Command.from_indices(indices))
        rewards.append(reward)
        records.append(env.last_records if isinstance(env, TwinEnv) else env.last_record)
        if done:
            break
    return commands, rewards, records


def _build_rollout(env, commands, rewards, records, seed: int, checkpoint_id: str, mode: str):
    if isinstance(env, TwinEnv):
        records_a = [pair[0] for pair in records]
        records_s = [pair[1] for pair in records]
        pred_a = Trajectory.from_states([env.initial.world_a] + [r.post for r in records_a])
        pred_s = Trajectory.from_states([env.initial.world_s] + [r.post for r in records_s])
        plan = Plan("alpha", tuple(commands), seed, checkpoint_id, mode)
        return AlphaRollout(plan, pred_a, pred_s, per_step_divergence(pred_a, pred_s), records_a, records_s)

    predicted = Trajectory.from_states([env.initial] + [r.post for r in records])
    plan = Plan("beta", tuple(commands), seed, checkpoint_id, mode)
    return BetaRollout(plan, predicted, records, rewards, env.arrivals.copy())


def plan_score(rollout: Union[AlphaRollout, BetaRollout]) -> Tuple[float, float]:
    """Ranking key for candidate plans: larger is better."""
    if isinstance(rollout, AlphaRollout):
        return rollout.max_divergence, float(rollout.divergence.sum())
    return float(np.count_nonzero(rollout.arrivals)), float(sum(rollout.rewards))


def make_plan(
    model: PolicyModel,
    env: Union[TwinEnv, ConveyanceEnv],
    horizon: int,
    mode: str = "greedy",
    seed: int = 0,
    samples: int = 1,
) -> Union[AlphaRollout, BetaRollout]:
    """
    Roll the policy out in virtual space and record the commands with the
    predicted trajectories. In stochastic mode `samples` seeded rollouts are
    drawn and the one with the best plan_score is kept (first wins ties), so
    the result depends only on the checkpoint and the seed.
    """
    if horizon <= 0:
        raise PlanError(f"Plan horizon must be positive, got {horizon}")
    if mode not in ("greedy", "stochastic"):
        raise PlanError(f"Unknown plan mode {mode}")
    if samples < 1:
        raise PlanError(f"Plan needs at least one sample, got {samples}")
    checkpoint_id = model.checkpoint_id()
    n_draws = 1 if mode == "greedy" else samples

    best, best_score = None, None
    for draw in range(n_draws):
        rng = np.random.default_rng([seed, 3, draw])
        commands, rewards, records = _rollout(model, env, horizon, mode, rng)
        candidate = _build_rollout(env, commands, rewards, records, seed, checkpoint_id, mode)
        score = plan_score(candidate)
        if best is None or score > best_score:
            best, best_score = candidate, score
    if n_draws > 1:
        logger.info(f"Kept {best.plan.stage} plan with score {best_score} out of {n_draws} samples")
    return best


def replay_twin(plan: Plan, twin: TwinState, params: WorldParams) -> Tuple[Trajectory, Trajectory]:
    """Re-run a plan on a twin; reproduces the recorded predictions exactly."""
    env = TwinEnv(twin, params, max(len(plan), 1))
    env.reset()
    states_a, states_s = [twin.world_a], [twin.world_s]
    for cmd in plan.commands:
        env.step([int(a) for a in cmd.actions])
        states_a.append(env.twin.world_a)
        states_s.append(env.twin.world_s)
    return Trajectory.from_states(states_a), Trajectory.from_states(states_s)


def execute_plan(plan: Union[Plan, Sequence[Command]], world: RealWorld) -> Execution:
    """Apply the commands in order and return what the command base observes."""
    commands = plan.commands if isinstance(plan, Plan) else tuple(plan)
    states = [world.state]
    records = []
    for cmd in commands:
        record = world.apply(cmd)
        records.append(record)
        states.append(record.post)
    return Execution(Trajectory.from_states(states), records)


def push_only_motion(records: Sequence[StepRecord], agent: int, axis: Axis) -> bool:
    """True when the agent's observed coordinate on axis moves only on ticks where it collides."""
    for record in records:
        delta = record.post.observed[agent, axis.index] - record.pre.observed[agent, axis.index]
        if delta != 0.0 and not record.involves(agent):
            return False
    return True


def arrival_ticks(records: Sequence[StepRecord], goals, spec: BetaRewardSpec, n_agents: int) -> List[Optional[int]]:
    """1-based step of each agent's first entry into its goal radius."""
    ticks: List[Optional[int]] = [None] * n_agents
    for idx, record in enumerate(records, start=1):
        for agent in np.flatnonzero(arrived_mask(record.post, goals, spec)):
            if ticks[agent] is None:
                ticks[agent] = idx
    return ticks


def _plot_spec_for(config: RunConfig, series: Sequence[str]):
    return config.plot.model_copy(update={"series": list(series)})


def run_pipeline(config: RunConfig) -> MissionReport:
    """Execute every stage and write all artifacts to config.output_dir."""
    t0 = time.perf_counter()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: Dict[str, str] = {}
    harness = config.harness

    def finish(report: MissionReport) -> MissionReport:
        report_path = out / "report.json"
        summary_path = out / "summary.csv"
        artifacts["report"] = str(report_path)
        artifacts["summary"] = str(summary_path)
        report = report.model_copy(update={"wall_time_s": time.perf_counter() - t0, "artifacts": dict(artifacts)})
        write_summary(summary_path, report)
        write_report(report_path, report)
        logger.info(f"Pipeline finished with status {report.status}, verdict {report.verdict.value}")
        return report

    # Step 0a: probe
    real = RealWorld.from_config(config)
    fault_report = probe(real, config.world)
    if fault_report.is_healthy:
        logger.info("Probe found every axis responsive, nothing to diagnose")
        return finish(MissionReport(status="healthy", seed=config.seed, fault_report=fault_report))

    # Step 0b: twin virtual worlds from the probed observed state
    agent, axis = resolve_hypothesis(config, fault_report)
    twin = TwinState.initial(real.observed, agent_radii(config), agent, axis, tick=real.tick)

    # Step 1: plan alpha
    alpha = train_alpha(twin, config.train_alpha, config.world, harness.alpha_horizon)
    artifacts["checkpoint_alpha"] = str(out / "checkpoints" / "alpha.ckpt")
    save_checkpoint(alpha.model, artifacts["checkpoint_alpha"])
    artifacts["curve_alpha"] = str(write_curve(out / "curve_alpha.csv", alpha.curve))
    rollout = make_plan(alpha.model, TwinEnv(twin, config.world, harness.alpha_horizon),
                        harness.alpha_horizon, harness.plan_mode, config.seed, harness.plan_samples)
    artifacts["plan_alpha"] = str(write_plan(out / "plan_alpha.json", rollout.plan.to_file()))
    artifacts["pred_ha"] = str(write_trajectory(out / "pred_ha.jsonl", rollout.pred_a))
    artifacts["pred_hs"] = str(write_trajectory(out / "pred_hs.jsonl", rollout.pred_s))

    # Step 2: run plan alpha and classify
    execution = execute_plan(rollout.plan, real)
    artifacts["trace_alpha"] = str(write_step_trace(out / "trace_alpha.jsonl", execution.records))
    artifacts["real_alpha"] = str(write_trajectory(out / "real_alpha.jsonl", execution.trajectory))
    d_a, d_s = score_hypotheses(execution.trajectory, rollout.pred_a, rollout.pred_s)
    verdict = classify(execution.trajectory, rollout.pred_a, rollout.pred_s, config.rewards.margin)
    logger.info(f"Alpha divergence max {rollout.max_divergence:.3f}; d_a={d_a:.4f} d_s={d_s:.4f} -> {verdict.value}")

    collisions = sorted(set(collision_events(rollout.records_a)) | set(collision_events(rollout.records_s))
                        | set(collision_events(execution.records)))
    artifacts["plot_alpha"] = str(emit_plot(
        {"pred_a": rollout.pred_a, "pred_s": rollout.pred_s, "real": execution.trajectory},
        _plot_spec_for(config, config.plot.series),
        out / "alpha.svg",
        goals=goal_positions(config),
        collisions=collisions,
        arena_size=config.world.arena_size,
    ))

    report = MissionReport(
        status="inconclusive",
        seed=config.seed,
        fault_report=fault_report,
        hypothesis_agent=agent,
        hypothesis_axis=axis,
        verdict=verdict,
        distance_a=d_a,
        distance_s=d_s,
        divergence_total=divergence_total(rollout.pred_a, rollout.pred_s),
        divergence_max=rollout.max_divergence,
    )
    if verdict is Verdict.INCONCLUSIVE:
        logger.warning("Verdict inconclusive, halting after step 2")
        return finish(report)

    # Step 3: plan beta under the identified fault, from the post-alpha observed state
    fault = verdict_fault(verdict, agent, axis)
    env = conveyance_env(config, real.observed, fault, tick=real.tick)
    beta = train_beta(env, config.train_beta, verdict)
    artifacts["checkpoint_beta"] = str(out / "checkpoints" / "beta.ckpt")
    save_checkpoint(beta.model, artifacts["checkpoint_beta"])
    artifacts["curve_beta"] = str(write_curve(out / "curve_beta.csv", beta.curve))
    beta_rollout = make_plan(beta.model, env, harness.beta_horizon, harness.plan_mode, config.seed,
                             harness.plan_samples)
    artifacts["plan_beta"] = str(write_plan(out / "plan_beta.json", beta_rollout.plan.to_file()))
    artifacts["pred_beta"] = str(write_trajectory(out / "pred_beta.jsonl", beta_rollout.predicted))

    # Step 4: run plan beta
    beta_exec = execute_plan(beta_rollout.plan, real)
    artifacts["trace_beta"] = str(write_step_trace(out / "trace_beta.jsonl", beta_exec.records))
    artifacts["real_beta"] = str(write_trajectory(out / "real_beta.jsonl", beta_exec.trajectory))
    artifacts["plot_beta"] = str(emit_plot(
        {"real": beta_exec.trajectory},
        _plot_spec_for(config, ["real"]),
        out / "beta.svg",
        goals=goal_positions(config),
        collisions=collision_events(beta_exec.records),
        arena_size=config.world.arena_size,
    ))

    ticks = arrival_ticks(beta_exec.records, goal_positions(config), config.rewards.beta, config.n_agents)
    arrived = [t is not None for t in ticks]
    return finish(report.model_copy(update={
        "status": "complete",
        "arrival_ticks": ticks,
        "arrived": arrived,
        "mission_success": all(arrived),
        "push_only_motion": push_only_motion(beta_exec.records, agent, axis) if verdict is Verdict.H_A else None,
    }))


def evaluate_seed(config: RunConfig, seed: int) -> SeedRecord:
    """Train alpha from scratch for one seed and check the resulting plan."""
    config = config.with_seed(seed)
    agent, axis = resolve_hypothesis(config)
    twin = TwinState.initial(start_positions(config), agent_radii(config), agent, axis)
    horizon = config.harness.alpha_horizon
    alpha = train_alpha(twin, config.train_alpha, config.world, horizon)
    rollout = make_plan(alpha.model, TwinEnv(twin, config.world, horizon), horizon, config.harness.plan_mode, seed,
                        config.harness.plan_samples)

    verdicts = {}
    for label, fault in (("ha", FaultModel.actuator_lock(agent, axis)), ("hs", FaultModel.sensor_freeze(agent, axis))):
        real = RealWorld(config.agents, [fault], config.world, seed=seed)
        execution = execute_plan(rollout.plan, real)
        verdicts[label] = classify(execution.trajectory, rollout.pred_a, rollout.pred_s, config.rewards.margin)

    record = SeedRecord(
        seed=seed,
        working=rollout.max_divergence > config.rewards.theta_work,
        max_divergence=rollout.max_divergence,
        total_divergence=float(rollout.divergence.sum()),
        verdict_real_ha=verdicts["ha"],
        verdict_real_hs=verdicts["hs"],
        collision_precedes_divergence=collision_precedes_divergence(
            rollout.divergence, rollout.collisions_by_tick("a"), rollout.collisions_by_tick("s"), agent
        ),
    )
    logger.info(f"Seed {seed}: working={record.working} max divergence {record.max_divergence:.3f}")
    return record


def success_rate(config: RunConfig, n_seeds: int, workers: int = 1) -> SuccessRateReport:
    """Fraction of from-scratch alpha trainings whose plan separates the hypotheses."""
    if n_seeds < 1:
        raise ConfigError("success_rate needs at least one seed")
    seeds = [config.seed + k for k in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(evaluate_seed, [config] * n_seeds, seeds))
    else:
        records = [evaluate_seed(config, seed) for seed in seeds]
    rate = sum(record.working for record in records) / n_seeds
    return SuccessRateReport(theta_work=config.rewards.theta_work, n_seeds=n_seeds, rate=rate, records=records)
