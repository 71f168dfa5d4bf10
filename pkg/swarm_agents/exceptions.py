"""
Exceptions raised by the swarm diagnosis library.
"""

from typing import Optional


class SwarmError(Exception):
    """Base class for every library error"""


class CommandError(SwarmError):
    """Command does not carry exactly one action per agent"""


class GeometryError(SwarmError):
    """Positions or probe geometry cannot be handled"""


class TrajectoryError(SwarmError):
    """Trajectories with mismatched length or width"""


class ModelShapeError(SwarmError):
    """Observation or weight dimensions do not match the policy model"""


class CheckpointError(SwarmError):
    """Checkpoint file is malformed"""


class GridError(SwarmError):
    """Invalid cell size or cutoff for the uniform grid"""


class PlanError(SwarmError):
    """Plan cannot be generated or replayed"""


class ConfigError(SwarmError):
    """Run-config file is missing or invalid"""


class TrainingDivergedError(SwarmError):
    """Non-finite loss during a policy update"""

    def __init__(self, message: str, seed: Optional[int] = None, step: Optional[int] = None):
        super().__init__(f"{message} (seed={seed}, step={step})")
        self.seed = seed
        self.step = step
