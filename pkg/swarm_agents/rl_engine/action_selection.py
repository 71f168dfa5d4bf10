"""
Action selection: categorical sampling from policy logits plus the classic
value-based rules (greedy, epsilon-greedy, Boltzmann).
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np

from ..models import Command
from .policy_model import log_softmax


def _categorical(probs: np.ndarray, u: float) -> int:
    # inverse-CDF draw; clamp guards cumulative round-off below 1
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, probs.shape[-1] - 1)


def sample_indices(logits: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """Per-agent categorical draw; returns action indices and the joint log-prob."""
    logp = log_softmax(np.asarray(logits, dtype=float))
    probs = np.exp(logp)
    draws = rng.random(logp.shape[0])
    indices = np.array([_categorical(probs[j], draws[j]) for j in range(logp.shape[0])])
    return indices, float(logp[np.arange(logp.shape[0]), indices].sum())


def sample_action(logits: np.ndarray, rng: np.random.Generator) -> Tuple[Command, float]:
    indices, logp = sample_indices(logits, rng)
    return Command.from_indices(indices), logp


def greedy_indices(logits: np.ndarray) -> np.ndarray:
    return np.array([select_greedy(row) for row in np.asarray(logits)])


def select_greedy(values) -> int:
    """Argmax with ties broken by the lowest index."""
    return int(np.argmax(np.asarray(values, dtype=float)))


def eps_greedy_probs(values, eps: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    k = values.shape[0]
    probs = np.full(k, eps / k)
    probs[select_greedy(values)] += 1.0 - eps
    return probs


def select_eps_greedy(values, eps: float, rng: np.random.Generator) -> int:
    values = np.asarray(values, dtype=float)
    if rng.random() < eps:
        return int(rng.integers(values.shape[0]))
    return select_greedy(values)


def boltzmann_probs(values, beta: float) -> np.ndarray:
    """Probabilities proportional to exp(+beta * value)."""
    values = np.asarray(values, dtype=float)
    if math.isinf(beta) and beta > 0:
        probs = np.zeros_like(values)
        probs[select_greedy(values)] = 1.0
        return probs
    return np.exp(log_softmax(beta * values))


def select_boltzmann(values, beta: float, rng: np.random.Generator) -> int:
    return _categorical(boltzmann_probs(values, beta), rng.random())
