import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from swarm_agents import mission_pipeline
from swarm_agents.config import HarnessParams, HypothesisConfig, RewardsConfig, RunConfig, TrainConfig
from swarm_agents.environments import TwinEnv
from swarm_agents.exceptions import ConfigError, PlanError
from swarm_agents.hypothesis_engine import TwinState, classify
from swarm_agents.mission_pipeline import (
    AlphaRollout,
    BetaRollout,
    Plan,
    agent_radii,
    conveyance_env,
    evaluate_seed,
    execute_plan,
    make_plan,
    plan_score,
    push_only_motion,
    replay_twin,
    resolve_hypothesis,
    run_pipeline,
    start_positions,
    success_rate,
    train_alpha,
    train_beta,
    verdict_fault,
)
from swarm_agents.models import Action, Axis, Command, FaultModel, Verdict
from swarm_agents.rl_engine import PolicyModel
from swarm_agents.trace_io import read_report, read_trajectory
from swarm_agents.world_core import RealWorld
from tests.helpers import TINY_TRAIN, agent, stack_then_push_plan


@pytest.fixture
def twin(default_config):
    return TwinState.initial(start_positions(default_config), agent_radii(default_config), 1, Axis.Y)


@pytest.fixture
def alpha_model():
    return PolicyModel.initialize(12, 3, (16, 16), seed=0)


def hand_plan():
    return Plan("alpha", tuple(stack_then_push_plan()), seed=0, checkpoint_id="hand")


class TestMakePlan:
    def test_alpha_rollout_shapes(self, twin, params, alpha_model):
        rollout = make_plan(alpha_model, TwinEnv(twin, params, 10), 10)
        assert isinstance(rollout, AlphaRollout)
        assert len(rollout.plan) == 10
        assert len(rollout.pred_a) == len(rollout.pred_s) == 11
        assert rollout.divergence.shape == (11,)
        assert rollout.divergence[0] == 0.0
        assert len(rollout.collisions_by_tick("a")) == 11
        assert rollout.plan.checkpoint_id == alpha_model.checkpoint_id()

    def test_replay_reproduces_predictions(self, twin, params, alpha_model):
        rollout = make_plan(alpha_model, TwinEnv(twin, params, 12), 12, mode="stochastic", seed=4)
        pred_a, pred_s = replay_twin(rollout.plan, twin, params)
        assert_array_equal(pred_a.states, rollout.pred_a.states)
        assert_array_equal(pred_s.states, rollout.pred_s.states)

    def test_greedy_is_deterministic(self, twin, params, alpha_model):
        a = make_plan(alpha_model, TwinEnv(twin, params, 6), 6)
        b = make_plan(alpha_model, TwinEnv(twin, params, 6), 6, seed=99)
        assert a.plan.commands == b.plan.commands

    @pytest.mark.parametrize("horizon", [0, -3])
    def test_non_positive_horizon_rejected(self, twin, params, alpha_model, horizon):
        with pytest.raises(PlanError):
            make_plan(alpha_model, TwinEnv(twin, params, 5), horizon)

    def test_unknown_mode_rejected(self, twin, params, alpha_model):
        with pytest.raises(PlanError):
            make_plan(alpha_model, TwinEnv(twin, params, 5), 5, mode="softmax")

    def test_beta_plan_stops_when_everyone_arrives(self):
        config = RunConfig(agents=[agent(0, 5.0, 5.0)], fault=FaultModel.healthy())
        env = conveyance_env(config, [[5.0, 5.0]], FaultModel.healthy(), horizon=10)
        rollout = make_plan(PolicyModel.initialize(2, 1, (8,), seed=0), env, 10)
        assert isinstance(rollout, BetaRollout)
        assert len(rollout.plan) == 1
        assert len(rollout.predicted) == 2

    def test_samples_must_be_positive(self, twin, params, alpha_model):
        with pytest.raises(PlanError):
            make_plan(alpha_model, TwinEnv(twin, params, 5), 5, mode="stochastic", samples=0)

    def test_best_of_samples_never_worse_than_first_draw(self, twin, params, alpha_model):
        single = make_plan(alpha_model, TwinEnv(twin, params, 12), 12, mode="stochastic", seed=2)
        best = make_plan(alpha_model, TwinEnv(twin, params, 12), 12, mode="stochastic", seed=2, samples=6)
        assert plan_score(best) >= plan_score(single)

    def test_stochastic_plan_depends_only_on_seed(self, twin, params, alpha_model):
        a = make_plan(alpha_model, TwinEnv(twin, params, 12), 12, mode="stochastic", seed=5, samples=4)
        b = make_plan(alpha_model, TwinEnv(twin, params, 12), 12, mode="stochastic", seed=5, samples=4)
        assert a.plan == b.plan
        assert_array_equal(a.pred_a.states, b.pred_a.states)

    def test_greedy_ignores_samples(self, twin, params, alpha_model):
        a = make_plan(alpha_model, TwinEnv(twin, params, 6), 6)
        b = make_plan(alpha_model, TwinEnv(twin, params, 6), 6, samples=8)
        assert a.plan.commands == b.plan.commands

    def test_alpha_score_ranks_peak_divergence_first(self):
        peaked = AlphaRollout(hand_plan(), None, None, np.array([0.0, 0.0, 0.5]), [], [])
        spread = AlphaRollout(hand_plan(), None, None, np.array([0.0, 0.4, 0.4]), [], [])
        assert plan_score(peaked) > plan_score(spread)

    def test_beta_score_ranks_arrivals_first(self):
        plan = Plan("beta", (), 0, "hand")
        arrived = BetaRollout(plan, None, [], [1.0], np.array([True, True]))
        closer = BetaRollout(plan, None, [], [40.0], np.array([True, False]))
        assert plan_score(arrived) > plan_score(closer)

    def test_beta_rollout_keeps_its_arrivals(self):
        config = RunConfig(agents=[agent(0, 5.0, 5.0)], fault=FaultModel.healthy())
        env = conveyance_env(config, [[5.0, 5.0]], FaultModel.healthy(), horizon=10)
        rollout = make_plan(PolicyModel.initialize(2, 1, (8,), seed=0), env, 10, mode="stochastic", samples=3)
        assert_array_equal(rollout.arrivals, [True])

    def test_plan_file_round_trip(self):
        plan = hand_plan()
        assert Plan.from_file(plan.to_file()) == plan


class TestExecuteAndClassify:
    @pytest.mark.parametrize(
        "fault,expected",
        [(FaultModel.actuator_lock(1, Axis.Y), Verdict.H_A), (FaultModel.sensor_freeze(1, Axis.Y), Verdict.H_S)],
        ids=["actuator", "sensor"],
    )
    def test_informative_plan_identifies_the_fault(self, default_config, twin, params, fault, expected):
        plan = hand_plan()
        pred_a, pred_s = replay_twin(plan, twin, params)
        real = execute_plan(plan, RealWorld(default_config.agents, [fault], params))
        assert classify(real.trajectory, pred_a, pred_s) is expected
        matching = pred_a if expected is Verdict.H_A else pred_s
        assert_allclose(real.trajectory.states, matching.states, atol=1e-9)

    def test_uninformative_plan_is_inconclusive(self, default_config, twin, params):
        plan = Plan("alpha", (Command.single(3, 1, Action.PLUS_Y),) * 4, 0, "hand")
        pred_a, pred_s = replay_twin(plan, twin, params)
        real = execute_plan(plan, RealWorld.from_config(default_config))
        assert classify(real.trajectory, pred_a, pred_s) is Verdict.INCONCLUSIVE

    def test_empty_plan_gives_current_state(self, default_config):
        world = RealWorld.from_config(default_config)
        execution = execute_plan([], world)
        assert len(execution.trajectory) == 1
        assert execution.records == []

    def test_execution_continues_from_world_tick(self, default_config):
        world = RealWorld.from_config(default_config)
        execute_plan([Command.stay(3)] * 2, world)
        execution = execute_plan([Command.stay(3)], world)
        assert execution.trajectory.start_tick == 2


class TestPushOnlyMotion:
    def test_pushed_locked_agent(self, params):
        state_records = []
        world = RealWorld([agent(0, 5.0, 3.5), agent(1, 5.0, 2.5), agent(2, 7.5, 2.5)],
                          [FaultModel.actuator_lock(1, Axis.Y)], params)
        state_records.append(world.apply(Command.single(3, 0, Action.MINUS_Y)))
        state_records.append(world.apply(Command.single(3, 1, Action.PLUS_Y)))
        assert world.observed[1, 1] == pytest.approx(2.375)
        assert push_only_motion(state_records, 1, Axis.Y)

    def test_self_propelled_motion_detected(self, params):
        world = RealWorld([agent(0, 5.0, 5.0)], [], params)
        records = [world.apply(Command(actions=(Action.PLUS_Y,)))]
        assert not push_only_motion(records, 0, Axis.Y)


class TestHypothesisResolution:
    def test_override_wins(self):
        config = RunConfig(hypothesis=HypothesisConfig(agent=2, axis=Axis.X))
        assert resolve_hypothesis(config) == (2, Axis.X)

    def test_falls_back_to_configured_fault(self, default_config):
        assert resolve_hypothesis(default_config) == (1, Axis.Y)

    def test_nothing_to_suspect(self, default_config):
        with pytest.raises(ConfigError):
            resolve_hypothesis(default_config.with_fault(FaultModel.healthy()))

    def test_inconclusive_has_no_fault_model(self):
        with pytest.raises(PlanError):
            verdict_fault(Verdict.INCONCLUSIVE, 1, Axis.Y)


def test_single_agent_twin_never_diverges(params):
    twin = TwinState.initial([[5.0, 5.0]], [0.5], 0, Axis.Y)
    result = train_alpha(twin, TINY_TRAIN, params, horizon=8)
    assert all(row.mean_episode_reward == 0.0 for row in result.curve)


def test_train_beta_refuses_inconclusive(default_config):
    env = conveyance_env(default_config, start_positions(default_config), FaultModel.actuator_lock(1, Axis.Y))
    with pytest.raises(PlanError):
        train_beta(env, TINY_TRAIN, Verdict.INCONCLUSIVE)


class TestRunPipeline:
    def test_healthy_world_stops_after_probe(self, tiny_config):
        report = run_pipeline(tiny_config.with_fault(FaultModel.healthy()))
        assert report.status == "healthy"
        assert report.verdict is Verdict.INCONCLUSIVE
        assert Path(report.artifacts["report"]).exists()

    def test_artifacts_exist(self, tiny_config):
        report = run_pipeline(tiny_config)
        assert report.status in {"complete", "inconclusive"}
        assert (report.hypothesis_agent, report.hypothesis_axis) == (1, Axis.Y)
        for path in report.artifacts.values():
            assert Path(path).exists(), path
        assert read_report(report.artifacts["report"]) == report
        for name in ("trace_alpha", "pred_ha", "pred_hs", "real_alpha", "checkpoint_alpha", "plot_alpha"):
            assert name in report.artifacts
        if report.status == "complete":
            assert "trace_beta" in report.artifacts
            assert len(report.arrival_ticks) == 3

    def test_same_seed_same_bytes(self, tiny_config, tmp_path):
        reports = [run_pipeline(tiny_config.with_output_dir(tmp_path / name)) for name in ("a", "b")]
        assert reports[0].status == reports[1].status
        for key in ("trace_alpha", "pred_ha", "pred_hs", "plot_alpha", "checkpoint_alpha"):
            assert Path(reports[0].artifacts[key]).read_bytes() == Path(reports[1].artifacts[key]).read_bytes()

    def test_same_seed_same_beta_bytes(self, tiny_config, tmp_path, monkeypatch):
        monkeypatch.setattr(mission_pipeline, "classify", lambda *args, **kwargs: Verdict.H_A)
        reports = [run_pipeline(tiny_config.with_output_dir(tmp_path / name)) for name in ("a", "b")]
        assert [r.status for r in reports] == ["complete", "complete"]
        for key in ("plan_beta", "pred_beta", "trace_beta", "real_beta", "plot_beta", "checkpoint_beta"):
            assert Path(reports[0].artifacts[key]).read_bytes() == Path(reports[1].artifacts[key]).read_bytes()

    def test_predictions_share_the_real_start_tick(self, tiny_config):
        report = run_pipeline(tiny_config)
        real = read_trajectory(report.artifacts["real_alpha"])
        assert real.start_tick > 0
        for key in ("pred_ha", "pred_hs"):
            assert read_trajectory(report.artifacts[key]).start_tick == real.start_tick


class TestSuccessRate:
    def test_infinite_threshold_gives_zero(self, tiny_config):
        config = tiny_config.model_copy(update={"rewards": RewardsConfig(theta_work=math.inf)})
        report = success_rate(config, n_seeds=2)
        assert report.rate == 0.0
        assert [r.seed for r in report.records] == [0, 1]

    def test_negative_threshold_gives_one(self, tiny_config):
        config = tiny_config.model_copy(update={"rewards": RewardsConfig(theta_work=-1.0)})
        assert success_rate(config, n_seeds=2).rate == 1.0

    def test_parallel_matches_sequential(self, tiny_config):
        sequential = success_rate(tiny_config, n_seeds=2, workers=1)
        parallel = success_rate(tiny_config, n_seeds=2, workers=2)
        assert sequential.records == parallel.records

    def test_needs_a_seed(self, tiny_config):
        with pytest.raises(ConfigError):
            success_rate(tiny_config, n_seeds=0)

    def test_seed_record_verdicts_never_wrong(self, tiny_config):
        record = evaluate_seed(tiny_config, 3)
        assert record.verdict_real_ha in {Verdict.H_A, Verdict.INCONCLUSIVE}
        assert record.verdict_real_hs in {Verdict.H_S, Verdict.INCONCLUSIVE}


FULL_SCALE = RunConfig(harness=HarnessParams(n_seeds=20))


@pytest.mark.slow
def test_acceptance_hypothesis_discrimination():
    report = success_rate(FULL_SCALE, n_seeds=20, workers=FULL_SCALE.harness.workers)
    assert report.rate >= 0.70
    for record in report.records:
        if record.working:
            assert record.verdict_real_ha is Verdict.H_A
            assert record.verdict_real_hs is Verdict.H_S
            assert record.collision_precedes_divergence


@pytest.mark.slow
def test_acceptance_beta_mission():
    config = FULL_SCALE
    successes = 0
    for seed in range(20):
        cfg = config.with_seed(seed)
        env = conveyance_env(cfg, start_positions(cfg), FaultModel.actuator_lock(1, Axis.Y))
        model = train_beta(env, cfg.train_beta, Verdict.H_A).model
        harness = cfg.harness
        rollout = make_plan(model, env, harness.beta_horizon, harness.plan_mode, seed, harness.plan_samples)
        world = RealWorld(cfg.agents, [FaultModel.actuator_lock(1, Axis.Y)], cfg.world, seed=seed)
        execution = execute_plan(rollout.plan, world)
        final = execution.trajectory.states[-1].reshape(-1, 2)
        goals = np.array([s.goal.as_tuple() for s in cfg.agents])
        arrived = np.linalg.norm(final - goals, axis=1) <= cfg.rewards.beta.goal_radius
        if arrived.all():
            successes += 1
            assert push_only_motion(execution.records, 1, Axis.Y)
    assert successes >= 14


@pytest.mark.slow
def test_healthy_single_agent_reaches_goal():
    config = RunConfig(
        agents=[agent(0, 2.5, 2.5).model_copy(update={"goal": agent(0, 7.5, 7.5).start})],
        fault=FaultModel.healthy(),
        train_beta=TrainConfig(total_steps=50_000, ent_coef=0.01),
    )
    hits = 0
    for seed in range(20):
        cfg = config.with_seed(seed)
        env = conveyance_env(cfg, start_positions(cfg), FaultModel.healthy(), horizon=64)
        model = train_beta(env, cfg.train_beta).model
        rollout = make_plan(model, env, 64, cfg.harness.plan_mode, seed, cfg.harness.plan_samples)
        hits += bool(rollout.arrivals.all())
        assert len(rollout.plan) <= 64
    assert hits >= 19
