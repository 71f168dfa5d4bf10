"""
Settings for the Swarm Diagnosis System
=======================================

Environment-level settings shared by every module. Values come from the
process environment or a local `.env` file (see `.env.example`).
"""

import logging
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from uagents.utils import get_logger as _uagents_logger

# Load environment variables
load_dotenv()


class SwarmSettings(BaseSettings):
    """Process-wide knobs that do not belong in a run-config"""

    model_config = SettingsConfigDict(env_prefix="SWARM_", extra="ignore")

    log_level: str = "INFO"
    progress: bool = True
    # process pool size for success-rate when --workers is not given; unset falls back to harness.workers
    workers: Optional[int] = Field(default=None, ge=1)
    command_base_port: int = 8090
    command_base_seed: str = "swarm_command_base_seed"
    default_output_dir: str = "runs"


@lru_cache(maxsize=1)
def get_settings() -> SwarmSettings:
    return SwarmSettings()


def get_logger(name: str) -> logging.Logger:
    """Module logger using the uAgents formatter at the configured level."""
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger
    return _uagents_logger(name, level=get_settings().log_level.upper())
