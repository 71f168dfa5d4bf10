"""
Policy Model - Feedforward actor-critic with analytic backprop
==============================================================

Shared tanh trunk (input -> 64 -> 64) feeding one 5-way logit head per agent
and a scalar value head. The joint policy is the product of the per-agent
categorical softmaxes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from ..exceptions import CheckpointError, ModelShapeError
from ..models import N_ACTIONS

CHECKPOINT_MAGIC = b"SWPM"
CHECKPOINT_VERSION = 1

Params = Dict[str, np.ndarray]


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


@dataclass
class ForwardCache:
    """Activations kept for the backward pass"""
    obs: np.ndarray
    hidden: Tuple[np.ndarray, ...]
    logits: np.ndarray
    value: np.ndarray


class PolicyModel:
    """
    Weights are stored as (fan_in, fan_out) matrices so a batch of
    observations (B, D) maps to (B, fan_out) with `x @ W + b`.
    """

    def __init__(self, input_dim: int, n_agents: int, hidden_sizes: Sequence[int] = (64, 64), params: Params = None):
        self.input_dim = int(input_dim)
        self.n_agents = int(n_agents)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.params: Params = params if params is not None else self._zeros()
        self._check_shapes()

    @classmethod
    def initialize(cls, input_dim: int, n_agents: int, hidden_sizes: Sequence[int] = (64, 64), seed: int = 0) -> "PolicyModel":
        model = cls(input_dim, n_agents, hidden_sizes)
        rng = np.random.default_rng(seed)
        fan_in = model.input_dim
        for idx, width in enumerate(model.hidden_sizes):
            model.params[f"W{idx}"] = _orthogonal(rng, fan_in, width, np.sqrt(2.0))
            fan_in = width
        model.params["Wpi"] = _orthogonal(rng, fan_in, model.n_agents * N_ACTIONS, 0.01)
        model.params["Wv"] = _orthogonal(rng, fan_in, 1, 1.0)
        return model

    def _shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes = {}
        fan_in = self.input_dim
        for idx, width in enumerate(self.hidden_sizes):
            shapes[f"W{idx}"] = (fan_in, width)
            shapes[f"b{idx}"] = (width,)
            fan_in = width
        shapes["Wpi"] = (fan_in, self.n_agents * N_ACTIONS)
        shapes["bpi"] = (self.n_agents * N_ACTIONS,)
        shapes["Wv"] = (fan_in, 1)
        shapes["bv"] = (1,)
        return shapes

    def _zeros(self) -> Params:
        return {name: np.zeros(shape) for name, shape in self._shapes().items()}

    def _check_shapes(self):
        for name, shape in self._shapes().items():
            if name not in self.params or self.params[name].shape != shape:
                raise ModelShapeError(f"Parameter {name} should have shape {shape}")

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(self._shapes())

    def copy(self) -> "PolicyModel":
        return PolicyModel(self.input_dim, self.n_agents, self.hidden_sizes,
                           {k: v.copy() for k, v in self.params.items()})

    def forward_batch(self, obs: np.ndarray) -> ForwardCache:
        obs = np.asarray(obs, dtype=float)
        if obs.ndim != 2 or obs.shape[1] != self.input_dim:
            raise ModelShapeError(f"Observation batch shape {obs.shape} does not match input {self.input_dim}")
        hidden = []
        x = obs
        for idx in range(len(self.hidden_sizes)):
            x = np.tanh(x @ self.params[f"W{idx}"] + self.params[f"b{idx}"])
            hidden.append(x)
        logits = (x @ self.params["Wpi"] + self.params["bpi"]).reshape(-1, self.n_agents, N_ACTIONS)
        value = (x @ self.params["Wv"] + self.params["bv"])[:, 0]
        return ForwardCache(obs=obs, hidden=tuple(hidden), logits=logits, value=value)

    def backward(self, cache: ForwardCache, d_logits: np.ndarray, d_value: np.ndarray) -> Params:
        """Gradients of a scalar loss given its derivatives w.r.t. logits (B, N, 5) and value (B,)."""
        batch = cache.obs.shape[0]
        d_pi = np.asarray(d_logits, dtype=float).reshape(batch, -1)
        d_v = np.asarray(d_value, dtype=float).reshape(batch, 1)
        top = cache.hidden[-1]

        grads: Params = {
            "Wpi": top.T @ d_pi,
            "bpi": d_pi.sum(axis=0),
            "Wv": top.T @ d_v,
            "bv": d_v.sum(axis=0),
        }
        d_x = d_pi @ self.params["Wpi"].T + d_v @ self.params["Wv"].T
        for idx in reversed(range(len(self.hidden_sizes))):
            h = cache.hidden[idx]
            d_z = d_x * (1.0 - h * h)
            below = cache.hidden[idx - 1] if idx > 0 else cache.obs
            grads[f"W{idx}"] = below.T @ d_z
            grads[f"b{idx}"] = d_z.sum(axis=0)
            d_x = d_z @ self.params[f"W{idx}"].T
        return grads

    def to_bytes(self) -> bytes:
        dims = (self.input_dim, *self.hidden_sizes, self.n_agents * N_ACTIONS, 1)
        header = CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, self.n_agents, len(dims))
        header += struct.pack(f"<{len(dims)}I", *dims)
        body = b"".join(
            np.ascontiguousarray(self.params[name], dtype="<f8").tobytes(order="C")
            for name in self.param_names
        )
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "PolicyModel":
        if data[:4] != CHECKPOINT_MAGIC:
            raise CheckpointError("Bad checkpoint magic")
        try:
            version, n_agents, n_dims = struct.unpack_from("<III", data, 4)
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"Unsupported checkpoint version {version}")
            dims = struct.unpack_from(f"<{n_dims}I", data, 16)
        except struct.error as e:
            raise CheckpointError(f"Truncated checkpoint header: {e}") from e

        if len(dims) < 3 or dims[-2] != n_agents * N_ACTIONS or dims[-1] != 1:
            raise CheckpointError(f"Inconsistent checkpoint dims {dims} for {n_agents} agents")
        model = cls(dims[0], n_agents, dims[1:-2])
        offset = 16 + 4 * n_dims
        for name in model.param_names:
            shape = model.params[name].shape
            count = int(np.prod(shape))
            if offset + 8 * count > len(data):
                raise CheckpointError(f"Truncated checkpoint at {name}")
            model.params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)
            offset += 8 * count
        if offset != len(data):
            raise CheckpointError("Trailing bytes in checkpoint")
        return model

    def checkpoint_id(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]


def forward(model: PolicyModel, obs) -> Tuple[np.ndarray, float]:
    """Single observation -> (logits (N, 5), value)."""
    obs = np.asarray(obs, dtype=float)
    if obs.ndim != 1:
        raise ModelShapeError(f"Expected a flat observation, got shape {obs.shape}")
    cache = model.forward_batch(obs[None, :])
    return cache.logits[0], float(cache.value[0])


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def save_checkpoint(model: PolicyModel, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model.to_bytes())
    return model.checkpoint_id()


def load_checkpoint(path: Union[str, Path]) -> PolicyModel:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    return PolicyModel.from_bytes(path.read_bytes())
