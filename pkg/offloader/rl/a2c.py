"""Synchronous advantage actor-critic update for the recurrent networks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..config import TrainerConfig
from ..errors import ShapeError, TrainingDivergenceError
from ..mdp import NUM_ACTIONS
from .network import PolicyNet, log_softmax, softmax


@dataclass(slots=True)
class Rollout:
    """One episode collected with the actor.

    ``actions`` are the sampled actions the policy is credited with;
    ``executed_actions`` are what the environment ran after the budget remap.
    """

    trace_id: str
    budget: int
    states: np.ndarray
    actions: np.ndarray
    executed_actions: np.ndarray
    rewards: np.ndarray
    probs: np.ndarray
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())


@dataclass(slots=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    actor_grad_norm: float
    critic_grad_norm: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "policy_loss": self.policy_loss,
            "value_loss": self.value_loss,
            "entropy": self.entropy,
            "actor_grad_norm": self.actor_grad_norm,
            "critic_grad_norm": self.critic_grad_norm,
        }


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    returns = np.zeros(len(rewards))
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns


def returns_and_advantages(rollout: Rollout, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Monte Carlo returns to the end of the episode and ``G - V``.

    Advantages are not normalized.
    """

    returns = discounted_returns(rollout.rewards, gamma)
    if rollout.values.shape != returns.shape:
        raise ShapeError(f"Rollout values {rollout.values.shape} do not match rewards {returns.shape}")
    return returns, returns - rollout.values


def actor_loss_and_grad(
    actor: PolicyNet,
    states: np.ndarray,
    actions: np.ndarray,
    advantages: np.ndarray,
    entropy_coeff: float,
) -> Tuple[float, np.ndarray, Dict[str, float]]:
    """Policy-gradient loss with an entropy bonus over ``(T, B)`` samples.

    ``loss = -mean(log pi(a|s) * A) - entropy_coeff * mean(H(pi(.|s)))`` with the
    advantages held constant.
    """

    z, cache = actor.forward_cached(states)
    probs = softmax(z)
    logp = log_softmax(z)
    count = actions.size
    onehot = np.eye(NUM_ACTIONS)[actions]
    logp_taken = (logp * onehot).sum(axis=-1)
    entropy = -(probs * logp).sum(axis=-1)

    policy_loss = -float(np.mean(logp_taken * advantages))
    mean_entropy = float(np.mean(entropy))
    loss = policy_loss - entropy_coeff * mean_entropy

    dz = -advantages[..., None] * (onehot - probs)
    dz += entropy_coeff * probs * (logp + entropy[..., None])
    grad = actor.backward(dz / count, cache)
    return loss, grad, {"policy_loss": policy_loss, "entropy": mean_entropy}


def critic_loss_and_grad(critic: PolicyNet, states: np.ndarray, returns: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error between predicted values and returns."""

    z, cache = critic.forward_cached(states)
    error = z[..., 0] - returns
    loss = float(np.mean(error**2))
    grad = critic.backward((2.0 * error / error.size)[..., None], cache)
    return loss, grad


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> Tuple[np.ndarray, float]:
    """Rescale ``grad`` to ``max_norm`` when its L2 norm is larger."""

    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def rmsprop_step(net: PolicyNet, grad: np.ndarray, lr: float, decay: float = 0.99, eps: float = 1e-5) -> None:
    """In-place RMSprop without momentum."""

    net.accumulators *= decay
    net.accumulators += (1.0 - decay) * grad**2
    net.params -= lr * grad / (np.sqrt(net.accumulators) + eps)


def stack_batch(batch: Sequence[Rollout], gamma: float) -> Dict[str, np.ndarray]:
    """Stack equal-length rollouts into ``(T, B, ...)`` arrays."""

    lengths = {len(r) for r in batch}
    if len(lengths) != 1:
        raise ShapeError(f"Rollouts in one update must share a horizon, got lengths {sorted(lengths)}")
    returns, advantages = zip(*(returns_and_advantages(r, gamma) for r in batch))
    return {
        "states": np.stack([r.states for r in batch], axis=1),
        "actions": np.stack([r.actions for r in batch], axis=1).astype(np.int64),
        "returns": np.stack(returns, axis=1),
        "advantages": np.stack(advantages, axis=1),
    }


def _check_finite(name: str, values: Dict[str, float], grad: np.ndarray) -> None:
    if all(np.isfinite(v) for v in values.values()) and np.all(np.isfinite(grad)):
        return
    diagnostics: Dict[str, object] = {k: float(v) for k, v in values.items()}
    diagnostics["network"] = name
    diagnostics["non_finite_grad_entries"] = int(np.size(grad) - np.count_nonzero(np.isfinite(grad)))
    raise TrainingDivergenceError(f"Non-finite {name} loss or gradient", diagnostics)


def a2c_update(
    actor: PolicyNet,
    critic: PolicyNet,
    batch: List[Rollout],
    cfg: TrainerConfig,
) -> Tuple[PolicyNet, PolicyNet, UpdateStats]:
    """Apply one synchronous update from a minibatch of full episodes."""

    if not batch:
        raise ValueError("a2c_update needs at least one rollout")
    if len(batch) > cfg.minibatch_episodes:
        raise ValueError(f"Batch of {len(batch)} exceeds minibatch_episodes={cfg.minibatch_episodes}")

    data = stack_batch(batch, cfg.gamma)
    actor_loss, actor_grad, actor_stats = actor_loss_and_grad(
        actor, data["states"], data["actions"], data["advantages"], cfg.entropy_coeff
    )
    _check_finite("actor", {"loss": actor_loss, **actor_stats}, actor_grad)
    value_loss, critic_grad = critic_loss_and_grad(critic, data["states"], data["returns"])
    _check_finite("critic", {"loss": value_loss}, critic_grad)

    actor_grad, actor_norm = clip_by_global_norm(actor_grad, cfg.grad_clip_norm)
    critic_grad, critic_norm = clip_by_global_norm(critic_grad, cfg.grad_clip_norm)
    rmsprop_step(actor, actor_grad, cfg.actor_lr, cfg.rmsprop_decay, cfg.rmsprop_eps)
    rmsprop_step(critic, critic_grad, cfg.critic_lr, cfg.rmsprop_decay, cfg.rmsprop_eps)

    stats = UpdateStats(
        policy_loss=actor_stats["policy_loss"],
        value_loss=value_loss,
        entropy=actor_stats["entropy"],
        actor_grad_norm=actor_norm,
        critic_grad_norm=critic_norm,
    )
    return actor, critic, stats
