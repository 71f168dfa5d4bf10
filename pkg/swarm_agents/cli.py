"""
Command-line front end
======================

    python -m swarm_agents pipeline --config configs/default.json --seed 7

Every subcommand accepts --config, --seed, --out and --json. Exit codes:
0 success, 1 usage or config error, 2 runtime failure, 3 inconclusive verdict.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import BaseModel

from .config import RunConfig, load_config
from .exceptions import ConfigError, SwarmError
from .hypothesis_engine import TwinState, classify, score_hypotheses
from .mission_pipeline import (
    Plan,
    agent_radii,
    conveyance_env,
    execute_plan,
    goal_positions,
    make_plan,
    resolve_hypothesis,
    run_pipeline,
    start_positions,
    success_rate,
    train_alpha,
    train_beta,
    verdict_fault,
)
from .environments import TwinEnv
from .models import Verdict
from .plotting import emit_plot
from .rl_engine import load_checkpoint, save_checkpoint
from .settings import get_logger, get_settings
from .spatial_index import bench_scaling, slopes
from .trace_io import (
    collisions_from_trace,
    read_plan,
    read_step_trace,
    read_trajectory,
    write_bench,
    write_csv,
    write_curve,
    write_plan,
    write_report,
    write_step_trace,
    write_trajectory,
)
from .world_core import RealWorld, probe as probe_world

logger = get_logger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INCONCLUSIVE = 3

VERDICT_CHOICE = click.Choice([Verdict.H_A.value, Verdict.H_S.value])


class VerdictResult(BaseModel):
    verdict: Verdict
    distance_a: float
    distance_s: float


class Artifacts(BaseModel):
    artifacts: dict


def common_options(fn):
    """--config / --seed / --out / --json on every subcommand."""
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Run-config JSON file (defaults to built-in settings)")
    @click.option("--seed", type=int, default=None, help="Override the run seed and both training seeds")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory")
    @click.option("--json", "as_json", is_flag=True, help="Print the result as JSON on stdout")
    @functools.wraps(fn)
    def wrapper(config_path, seed, out_dir, as_json, **kwargs):
        config = resolve_config(config_path, seed, out_dir)
        return fn(config=config, as_json=as_json, **kwargs)
    return wrapper


def resolve_config(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]) -> RunConfig:
    if config_path is not None:
        config = load_config(config_path)
    else:
        config = RunConfig(output_dir=get_settings().default_output_dir)
    if seed is not None:
        config = config.with_seed(seed)
    if out_dir is not None:
        config = config.with_output_dir(out_dir)
    return config


def resolve_workers(config: RunConfig, workers: Optional[int]) -> int:
    """--workers, else SWARM_WORKERS, else harness.workers."""
    if workers is not None:
        return workers
    return get_settings().workers or config.harness.workers


def emit(result: BaseModel, as_json: bool, text: str):
    if as_json:
        click.echo(result.model_dump_json(indent=2))
    else:
        click.echo(text)


def _out(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def cli():
    """Twin-hypothesis fault diagnosis for a simulated swarm."""


@cli.command()
@common_options
def probe(config: RunConfig, as_json: bool):
    """Probe every agent and report unresponsive axes."""
    world = RealWorld.from_config(config)
    report = probe_world(world, config.world)
    write_report(_out(config) / "fault_report.json", report)
    suspects = ", ".join(f"agent {a} axis {ax.value}" for a, ax in report.unresponsive()) or "none"
    emit(report, as_json, f"Unresponsive: {suspects}")
    return EXIT_OK


@cli.command("train-alpha")
@common_options
def train_alpha_cmd(config: RunConfig, as_json: bool):
    """Train the divergence-seeking policy on the twin worlds."""
    agent, axis = resolve_hypothesis(config)
    twin = TwinState.initial(start_positions(config), agent_radii(config), agent, axis)
    result = train_alpha(twin, config.train_alpha, config.world, config.harness.alpha_horizon)
    out = _out(config)
    ckpt = out / "checkpoints" / "alpha.ckpt"
    checkpoint_id = save_checkpoint(result.model, ckpt)
    curve = write_curve(out / "curve_alpha.csv", result.curve)
    emit(Artifacts(artifacts={"checkpoint": str(ckpt), "curve": str(curve), "checkpoint_id": checkpoint_id}),
         as_json, f"Saved alpha checkpoint {checkpoint_id} to {ckpt}")
    return EXIT_OK


@cli.command("train-beta")
@click.option("--verdict", type=VERDICT_CHOICE, default=Verdict.H_A.value, show_default=True,
              help="Fault hypothesis the conveyance policy is trained under")
@common_options
def train_beta_cmd(config: RunConfig, as_json: bool, verdict: str):
    """Train the conveyance policy under an identified fault."""
    agent, axis = resolve_hypothesis(config)
    verdict = Verdict(verdict)
    env = conveyance_env(config, start_positions(config), verdict_fault(verdict, agent, axis))
    result = train_beta(env, config.train_beta, verdict)
    out = _out(config)
    ckpt = out / "checkpoints" / "beta.ckpt"
    checkpoint_id = save_checkpoint(result.model, ckpt)
    curve = write_curve(out / "curve_beta.csv", result.curve)
    emit(Artifacts(artifacts={"checkpoint": str(ckpt), "curve": str(curve), "checkpoint_id": checkpoint_id}),
         as_json, f"Saved beta checkpoint {checkpoint_id} to {ckpt}")
    return EXIT_OK


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--stage", type=click.Choice(["alpha", "beta"]), default="alpha", show_default=True)
@click.option("--verdict", type=VERDICT_CHOICE, default=Verdict.H_A.value, show_default=True,
              help="Fault assumed by a beta plan")
@click.option("--horizon", type=int, default=None, help="Defaults to the harness horizon of the stage")
@common_options
def plan(config: RunConfig, as_json: bool, checkpoint: str, stage: str, verdict: str, horizon: Optional[int]):
    """Roll a trained policy out in virtual space and record the plan."""
    model = load_checkpoint(checkpoint)
    agent, axis = resolve_hypothesis(config)
    out = _out(config)
    artifacts = {}
    if stage == "alpha":
        horizon = config.harness.alpha_horizon if horizon is None else horizon
        twin = TwinState.initial(start_positions(config), agent_radii(config), agent, axis)
        rollout = make_plan(model, TwinEnv(twin, config.world, horizon), horizon, config.harness.plan_mode,
                            config.seed, config.harness.plan_samples)
        artifacts["pred_ha"] = str(write_trajectory(out / "pred_ha.jsonl", rollout.pred_a))
        artifacts["pred_hs"] = str(write_trajectory(out / "pred_hs.jsonl", rollout.pred_s))
    else:
        horizon = config.harness.beta_horizon if horizon is None else horizon
        env = conveyance_env(config, start_positions(config), verdict_fault(Verdict(verdict), agent, axis), horizon)
        rollout = make_plan(model, env, horizon, config.harness.plan_mode, config.seed, config.harness.plan_samples)
        artifacts["pred_beta"] = str(write_trajectory(out / "pred_beta.jsonl", rollout.predicted))
    artifacts["plan"] = str(write_plan(out / f"plan_{stage}.json", rollout.plan.to_file()))
    emit(Artifacts(artifacts=artifacts), as_json, f"Recorded {len(rollout.plan)}-step {stage} plan")
    return EXIT_OK


@cli.command()
@click.option("--plan", "plan_path", type=click.Path(exists=True, dir_okay=False), required=True)
@common_options
def execute(config: RunConfig, as_json: bool, plan_path: str):
    """Run a recorded plan on the real agents from their start positions."""
    recorded = Plan.from_file(read_plan(plan_path))
    execution = execute_plan(recorded, RealWorld.from_config(config))
    out = _out(config)
    artifacts = {
        "trace": str(write_step_trace(out / f"trace_{recorded.stage}.jsonl", execution.records)),
        "real": str(write_trajectory(out / f"real_{recorded.stage}.jsonl", execution.trajectory)),
    }
    emit(Artifacts(artifacts=artifacts), as_json, f"Executed {len(recorded)} commands")
    return EXIT_OK


@cli.command("classify")
@click.option("--real", "real_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pred-a", "pred_a_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pred-s", "pred_s_path", type=click.Path(exists=True, dir_okay=False), required=True)
@common_options
def classify_cmd(config: RunConfig, as_json: bool, real_path: str, pred_a_path: str, pred_s_path: str):
    """Decide which prediction the real trajectory follows."""
    real, pred_a, pred_s = (read_trajectory(p) for p in (real_path, pred_a_path, pred_s_path))
    d_a, d_s = score_hypotheses(real, pred_a, pred_s)
    verdict = classify(real, pred_a, pred_s, config.rewards.margin)
    emit(VerdictResult(verdict=verdict, distance_a=d_a, distance_s=d_s), as_json,
         f"{verdict.value} (d_a={d_a:.4f}, d_s={d_s:.4f})")
    return EXIT_INCONCLUSIVE if verdict is Verdict.INCONCLUSIVE else EXIT_OK


@cli.command()
@common_options
def pipeline(config: RunConfig, as_json: bool):
    """Probe, diagnose and convey; writes every artifact to the output directory."""
    report = run_pipeline(config)
    emit(report, as_json, f"Status {report.status}, verdict {report.verdict.value}, "
                          f"report at {report.artifacts['report']}")
    if report.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


@cli.command("success-rate")
@click.option("--n-seeds", type=int, default=None, help="Defaults to harness.n_seeds")
@click.option("--workers", type=int, default=None, help="Defaults to SWARM_WORKERS, then harness.workers")
@common_options
def success_rate_cmd(config: RunConfig, as_json: bool, n_seeds: Optional[int], workers: Optional[int]):
    """Train alpha from scratch for consecutive seeds and count working plans."""
    report = success_rate(config, n_seeds or config.harness.n_seeds, resolve_workers(config, workers))
    out = _out(config)
    write_report(out / "success_rate.json", report)
    write_csv(out / "success_rate.csv", report.records, footer=[f"rate {report.rate:.3f}"])
    emit(report, as_json, f"Success rate {report.rate:.2f} over {report.n_seeds} seeds")
    return EXIT_OK


@cli.command("bench-spatial")
@click.option("--sizes", default="256,512,1024,2048,4096", show_default=True, help="Comma-separated agent counts")
@click.option("--repetitions", type=int, default=3, show_default=True)
@common_options
def bench_spatial(config: RunConfig, as_json: bool, sizes: str, repetitions: int):
    """Time grid against naive pair search and fit the scaling exponents."""
    try:
        ns = [int(s) for s in sizes.split(",") if s.strip()]
    except ValueError as e:
        raise click.BadParameter(f"invalid size list {sizes!r}") from e
    rows = bench_scaling(ns, repetitions=repetitions, seed=config.seed)
    fitted = slopes(rows)
    path = write_bench(_out(config) / "bench_spatial.csv", rows, fitted)
    emit(Artifacts(artifacts={"bench": str(path), **{f"slope_{k}": f"{v:.3f}" for k, v in fitted.items()}}),
         as_json, ", ".join(f"{k} slope {v:.2f}" for k, v in sorted(fitted.items())))
    return EXIT_OK


@cli.command()
@click.option("--real", "real_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--pred-a", "pred_a_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--pred-s", "pred_s_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Step trace whose collisions are marked")
@click.option("--output", "output", type=click.Path(dir_okay=False), default=None)
@common_options
def plot(config: RunConfig, as_json: bool, real_path, pred_a_path, pred_s_path, trace_path, output):
    """Draw trajectory files as an SVG figure."""
    trajectories = {
        name: read_trajectory(path)
        for name, path in (("real", real_path), ("pred_a", pred_a_path), ("pred_s", pred_s_path))
        if path is not None
    }
    if not trajectories:
        raise click.UsageError("plot needs at least one of --real, --pred-a, --pred-s")
    spec = config.plot.model_copy(update={"series": [n for n in ("real", "pred_a", "pred_s") if n in trajectories]})
    collisions = collisions_from_trace(read_step_trace(trace_path)) if trace_path else None
    path = emit_plot(trajectories, spec, output or _out(config) / "plot.svg", goals=goal_positions(config),
                     collisions=collisions, arena_size=config.world.arena_size)
    emit(Artifacts(artifacts={"plot": str(path)}), as_json, f"Wrote {path}")
    return EXIT_OK


@cli.command()
@click.option("--port", type=int, default=None, help="Defaults to SWARM_COMMAND_BASE_PORT")
def serve(port: Optional[int]):
    """Run the command-base agent that accepts mission requests."""
    from .command_base import run_command_base

    run_command_base(port)
    return EXIT_OK


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map errors to exit codes."""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="swarm", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_RUNTIME
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except ConfigError as e:
        click.echo(f"Error: {e}", err=True)
        return EXIT_USAGE
    except SwarmError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return EXIT_RUNTIME
    return rv if isinstance(rv, int) else EXIT_OK


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
