"""
RL Engine Module
================

This module exports the policy model, action-selection rules and the PPO
learner used by both mission training stages.
"""

from .action_selection import (
    boltzmann_probs,
    eps_greedy_probs,
    greedy_indices,
    sample_action,
    sample_indices,
    select_boltzmann,
    select_eps_greedy,
    select_greedy,
)
from .policy_model import PolicyModel, forward, load_checkpoint, save_checkpoint, softmax
from .ppo import RolloutBuffer, TrainResult, gae_advantages, ppo_update, train_ppo

__all__ = [
    "PolicyModel",
    "forward",
    "softmax",
    "save_checkpoint",
    "load_checkpoint",
    "sample_action",
    "sample_indices",
    "greedy_indices",
    "select_greedy",
    "select_eps_greedy",
    "select_boltzmann",
    "eps_greedy_probs",
    "boltzmann_probs",
    "RolloutBuffer",
    "TrainResult",
    "gae_advantages",
    "ppo_update",
    "train_ppo",
]
