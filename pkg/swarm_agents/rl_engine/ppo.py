"""
PPO - Clipped-surrogate policy optimisation with generalized advantage estimation
================================================================================

Rollouts are collected on-policy into a fixed-capacity buffer; each full
buffer is turned into GAE advantages and consumed by several epochs of
minibatch Adam steps on the clipped surrogate plus a value regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np
from tqdm import tqdm

from ..config import TrainConfig
from ..exceptions import TrainingDivergedError
from ..models import CurveRow
from ..settings import get_logger, get_settings
from .action_selection import sample_indices
from .policy_model import Params, PolicyModel, forward, log_softmax

logger = get_logger("rl_engine")

ADV_EPS = 1e-8


class Environment(Protocol):
    obs_dim: int
    n_agents: int

    def reset(self) -> np.ndarray: ...

    def step(self, action_indices: np.ndarray) -> Tuple[np.ndarray, float, bool]: ...


class RolloutBuffer:
    """Fixed-capacity store of (obs, actions, log-prob, reward, value, done)"""

    def __init__(self, capacity: int, obs_dim: int, n_agents: int):
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim))
        self._actions = np.zeros((capacity, n_agents), dtype=np.int64)
        self._logp = np.zeros(capacity)
        self._rewards = np.zeros(capacity)
        self._values = np.zeros(capacity)
        self._dones = np.zeros(capacity, dtype=bool)
        self.size = 0

    def add(self, obs, actions, logp: float, reward: float, value: float, done: bool):
        if self.full:
            raise IndexError("Rollout buffer is full")
        t = self.size
        self._obs[t] = obs
        self._actions[t] = actions
        self._logp[t] = logp
        self._rewards[t] = reward
        self._values[t] = value
        self._dones[t] = done
        self.size += 1

    @property
    def full(self) -> bool:
        return self.size >= self.capacity

    def clear(self):
        self.size = 0

    @property
    def obs(self) -> np.ndarray:
        return self._obs[:self.size]

    @property
    def actions(self) -> np.ndarray:
        return self._actions[:self.size]

    @property
    def logp(self) -> np.ndarray:
        return self._logp[:self.size]

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[:self.size]

    @property
    def values(self) -> np.ndarray:
        return self._values[:self.size]

    @property
    def dones(self) -> np.ndarray:
        return self._dones[:self.size]


def gae_advantages(buffer: RolloutBuffer, gamma: float, gae_lambda: float, last_value: float) -> Tuple[np.ndarray, np.ndarray]:
    """Backward GAE recursion; returns (advantages, returns = advantages + values)."""
    if buffer.size == 0:
        raise ValueError("Cannot estimate advantages from an empty buffer")
    rewards, values, dones = buffer.rewards, buffer.values, buffer.dones
    advantages = np.zeros(buffer.size)
    running = 0.0
    for t in reversed(range(buffer.size)):
        next_value = last_value if t == buffer.size - 1 else values[t + 1]
        nonterminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        running = delta + gamma * gae_lambda * nonterminal * running
        advantages[t] = running
    return advantages, advantages + values


class Adam:
    def __init__(self, params: Params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad_norm(grads: Params, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / total
        for name in grads:
            grads[name] = grads[name] * scale
    return total


@dataclass
class PPOStats:
    policy_loss: float
    value_loss: float
    kl: float
    clip_fraction: float


def ppo_losses(model: PolicyModel, obs, actions, old_logp, advantages, returns, cfg: TrainConfig):
    """
    Loss terms and their gradients for one minibatch.

    Returns (policy_loss, value_loss, entropy, clip_fraction, grads, new_logp).
    """
    batch = obs.shape[0]
    cache = model.forward_batch(obs)
    logp_all = log_softmax(cache.logits)
    probs = np.exp(logp_all)
    rows = np.arange(batch)[:, None]
    heads = np.arange(model.n_agents)[None, :]
    new_logp = logp_all[rows, heads, actions].sum(axis=1)

    ratio = np.exp(new_logp - old_logp)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * advantages
    policy_loss = -float(np.minimum(surr1, surr2).mean())
    value_err = cache.value - returns
    value_loss = 0.5 * float((value_err ** 2).mean())
    head_entropy = -(probs * logp_all).sum(axis=2)
    entropy = float(head_entropy.sum(axis=1).mean())

    # the min picks the unclipped branch exactly where it carries gradient
    d_new_logp = -(advantages * ratio) * (surr1 <= surr2) / batch
    onehot = np.zeros_like(probs)
    onehot[rows, heads, actions] = 1.0
    d_logits = d_new_logp[:, None, None] * (onehot - probs)
    if cfg.ent_coef > 0.0:
        d_entropy = -probs * (logp_all + head_entropy[:, :, None])
        d_logits -= cfg.ent_coef * d_entropy / batch
    d_value = cfg.vf_coef * value_err / batch
    grads = model.backward(cache, d_logits, d_value)

    clip_fraction = float((np.abs(ratio - 1.0) > cfg.clip_eps).mean())
    return policy_loss, value_loss, entropy, clip_fraction, grads, new_logp


def ppo_update(
    model: PolicyModel,
    buffer: RolloutBuffer,
    cfg: TrainConfig,
    last_value: float = 0.0,
    optimizer: Optional[Adam] = None,
    rng: Optional[np.random.Generator] = None,
    step: Optional[int] = None,
) -> PPOStats:
    """Run cfg.epochs of minibatch updates on the buffer, in place on the model."""
    optimizer = optimizer or Adam(model.params, cfg.learning_rate)
    rng = rng or np.random.default_rng(cfg.seed)

    advantages, returns = gae_advantages(buffer, cfg.gamma, cfg.gae_lambda, last_value)
    advantages = (advantages - advantages.mean()) / (advantages.std() + ADV_EPS)

    obs, actions, old_logp = buffer.obs, buffer.actions, buffer.logp
    size = buffer.size
    policy_losses, value_losses, clip_fracs = [], [], []
    for _ in range(cfg.epochs):
        order = rng.permutation(size)
        for start in range(0, size, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            policy_loss, value_loss, entropy, clip_frac, grads, _ = ppo_losses(
                model, obs[idx], actions[idx], old_logp[idx], advantages[idx], returns[idx], cfg
            )
            total = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy
            if not np.isfinite(total):
                raise TrainingDivergedError("Non-finite PPO loss", seed=cfg.seed, step=step)
            clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(model.params, grads)
            policy_losses.append(policy_loss)
            value_losses.append(value_loss)
            clip_fracs.append(clip_frac)

    cache = model.forward_batch(obs)
    logp_all = log_softmax(cache.logits)
    new_logp = logp_all[np.arange(size)[:, None], np.arange(model.n_agents)[None, :], actions].sum(axis=1)
    kl = float((old_logp - new_logp).mean())
    return PPOStats(
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        kl=kl,
        clip_fraction=float(np.mean(clip_fracs)),
    )


@dataclass
class TrainResult:
    model: PolicyModel
    curve: List[CurveRow] = field(default_factory=list)


def train_ppo(
    env: Environment,
    cfg: TrainConfig,
    desc: str = "ppo",
    on_update: Optional[Callable[[CurveRow], None]] = None,
) -> TrainResult:
    """Train a fresh policy on env for cfg.total_steps environment steps."""
    model = PolicyModel.initialize(env.obs_dim, env.n_agents, cfg.hidden_sizes, seed=cfg.seed)
    action_rng = np.random.default_rng([cfg.seed, 1])
    shuffle_rng = np.random.default_rng([cfg.seed, 2])
    optimizer = Adam(model.params, cfg.learning_rate)
    buffer = RolloutBuffer(cfg.rollout_len, env.obs_dim, env.n_agents)
    result = TrainResult(model=model)

    obs = env.reset()
    episode_reward = 0.0
    finished: List[float] = []
    done = False
    steps = 0
    with tqdm(total=cfg.total_steps, desc=desc, disable=not get_settings().progress) as bar:
        while steps < cfg.total_steps:
            logits, value = forward(model, obs)
            actions, logp = sample_indices(logits, action_rng)
            next_obs, reward, done = env.step(actions)
            buffer.add(obs, actions, logp, reward, value, done)
            episode_reward += reward
            steps += 1
            bar.update(1)
            obs = next_obs
            if done:
                finished.append(episode_reward)
                episode_reward = 0.0
                obs = env.reset()

            if buffer.full or steps == cfg.total_steps:
                last_value = 0.0 if done else forward(model, obs)[1]
                stats = ppo_update(model, buffer, cfg, last_value, optimizer, shuffle_rng, step=steps)
                mean_reward = float(np.mean(finished)) if finished else episode_reward
                row = CurveRow(
                    update=len(result.curve),
                    env_steps=steps,
                    mean_episode_reward=mean_reward,
                    policy_loss=stats.policy_loss,
                    value_loss=stats.value_loss,
                    kl=stats.kl,
                )
                result.curve.append(row)
                if on_update:
                    on_update(row)
                bar.set_postfix(reward=f"{mean_reward:.3f}", kl=f"{stats.kl:.4f}")
                buffer.clear()
                finished = []

    logger.info(f"{desc}: trained {steps} steps in {len(result.curve)} updates")
    return result
