"""
Command Base Agent - Runs diagnosis missions on request
=======================================================

A uAgent that receives a MissionRequest (run-config JSON, seed, output
directory), runs the full pipeline off the event loop and replies with a
MissionResponse.
"""

import asyncio
from typing import Optional

from uagents import Agent, Bureau, Context, Model

from .config import RunConfig, parse_config
from .mission_pipeline import run_pipeline
from .settings import get_logger, get_settings

logger = get_logger("command_base")


class MissionRequest(Model):
    """Mission submitted to the command base"""
    config_json: Optional[str] = None
    seed: Optional[int] = None
    out_dir: Optional[str] = None


class MissionResponse(Model):
    """Outcome of a mission; status is healthy, inconclusive, complete or error"""
    status: str
    verdict: Optional[str] = None
    report_path: Optional[str] = None
    error: Optional[str] = None


def handle_mission_request(msg: MissionRequest) -> MissionResponse:
    """Run one mission synchronously; never raises."""
    try:
        config = parse_config(msg.config_json) if msg.config_json else RunConfig()
        if msg.seed is not None:
            config = config.with_seed(msg.seed)
        if msg.out_dir:
            config = config.with_output_dir(msg.out_dir)
        report = run_pipeline(config)
        return MissionResponse(
            status=report.status,
            verdict=report.verdict.value,
            report_path=report.artifacts.get("report"),
        )
    except Exception as e:
        logger.exception("Mission failed")
        return MissionResponse(status="error", error=str(e))


def create_command_base_agent(port: Optional[int] = None, seed: Optional[str] = None) -> Agent:
    """Create and configure the command base agent"""
    settings = get_settings()
    port = port or settings.command_base_port

    agent = Agent(
        name="swarm_command_base",
        port=port,
        seed=seed or settings.command_base_seed,
        endpoint=[f"http://localhost:{port}/submit"],
    )

    @agent.on_event("startup")
    async def startup(ctx: Context):
        ctx.logger.info(f"Command base started at {ctx.agent.address}")

    @agent.on_message(model=MissionRequest)
    async def handle_request(ctx: Context, sender: str, msg: MissionRequest):
        ctx.logger.info(f"Mission request from {sender} (seed={msg.seed}, out={msg.out_dir})")
        loop = asyncio.get_running_loop()
        response = await loop.run_in_executor(None, handle_mission_request, msg)
        if response.status == "error":
            ctx.logger.error(f"Mission failed: {response.error}")
        else:
            ctx.logger.info(f"Mission {response.status}, verdict {response.verdict}")
        await ctx.send(sender, response)

    return agent


def run_command_base(port: Optional[int] = None):
    """Serve the command base until interrupted."""
    print("=" * 60)
    print("🛰️  Swarm Command Base Starting")
    print("=" * 60)

    port = port or get_settings().command_base_port
    bureau = Bureau(port=port, endpoint=[f"http://localhost:{port}/submit"])
    bureau.add(create_command_base_agent(port))
    bureau.run()
