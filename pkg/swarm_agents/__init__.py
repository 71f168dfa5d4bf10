"""
Swarm Agents
============

Deterministic multi-agent arena with a command base that tells an actuator
axis lock from a sensor axis freeze by steering the swarm into informative
collisions, then conveys every agent to its goal under the identified fault.
"""

from .config import RunConfig, load_config
from .mission_pipeline import execute_plan, make_plan, run_pipeline, success_rate
from .models import Action, Axis, Command, FaultModel, Verdict

__all__ = [
    "RunConfig",
    "load_config",
    "run_pipeline",
    "success_rate",
    "make_plan",
    "execute_plan",
    "Action",
    "Axis",
    "Command",
    "FaultModel",
    "Verdict",
]
