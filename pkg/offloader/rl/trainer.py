"""Training loop, rollout collection and checkpoints for the A2C offloader."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from ..config import GenConfig, TrainerConfig
from ..data.synthetic import estimate_phi_scale, generate_dataset, generate_trace
from ..errors import InvariantViolation
from ..mdp import Action, EpisodeEnv, RewardParams, Trace, budget_from_fraction
from ..utils.logger import get_logger
from .a2c import Rollout, UpdateStats, a2c_update
from .network import PolicyNet, init_network

logger = get_logger(__name__)

CURVE_COLUMNS = ["episode", "mean_reward", "policy_loss", "value_loss", "entropy"]


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    cumulative = np.cumsum(probs)
    return min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")), len(probs) - 1)


def collect_rollout(
    actor: PolicyNet,
    critic: PolicyNet,
    trace: Trace,
    budget: int,
    params: RewardParams,
    phi_scale: float,
    rng: np.random.Generator,
) -> Rollout:
    """Play one episode sampling actions from the actor."""

    env = EpisodeEnv(trace, budget, params)
    T = trace.horizon
    states = np.zeros((T, actor.input_dim))
    probs = np.zeros((T, actor.output_dim))
    actions = np.zeros(T, dtype=np.int64)
    executed = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T)

    h, c = actor.initial_state(1)
    for t in range(T):
        states[t] = env.encode(phi_scale)
        p, h, c = actor.step(states[t][None, :], h, c)
        probs[t] = p[0]
        actions[t] = sample_action(p[0], rng)
        result = env.step(int(actions[t]))
        executed[t] = result.info.executed_action
        rewards[t] = result.reward

    cloud_queries = int(np.count_nonzero(executed == Action.QUERY_CLOUD))
    if cloud_queries > budget:
        raise InvariantViolation(
            f"Rollout on {trace.trace_id} executed {cloud_queries} cloud queries with budget {budget}"
        )
    values, _ = critic.forward(states)
    return Rollout(
        trace_id=trace.trace_id,
        budget=budget,
        states=states,
        actions=actions,
        executed_actions=executed,
        rewards=rewards,
        probs=probs,
        values=values[:, 0],
    )


@dataclass(frozen=True, slots=True)
class EpisodeTask:
    trace_seed: int
    budget_fraction: float
    episode_seed: int


def _run_task(
    task: EpisodeTask,
    actor: PolicyNet,
    critic: PolicyNet,
    gen_cfg: GenConfig,
    params: RewardParams,
    phi_scale: float,
) -> Rollout:
    trace = generate_trace(gen_cfg, task.trace_seed)
    budget = budget_from_fraction(task.budget_fraction, trace.horizon)
    return collect_rollout(actor, critic, trace, budget, params, phi_scale, np.random.default_rng(task.episode_seed))


def _run_task_packed(args: tuple) -> Rollout:
    return _run_task(*args)


# --- checkpoints --------------------------------------------------------------


@dataclass(slots=True)
class Checkpoint:
    actor: PolicyNet
    critic: PolicyNet
    episode: int
    phi_scale: float
    rng_state: Dict[str, Any]
    curve: List[Dict[str, float]] = field(default_factory=list)
    episode_rewards: List[float] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    def restore_rng(self) -> np.random.Generator:
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng_state
        return rng


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
    """Write a self-describing ``.npz`` checkpoint."""

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "actor": checkpoint.actor.dims(),
        "critic": checkpoint.critic.dims(),
        "actor_layout": checkpoint.actor.layout,
        "critic_layout": checkpoint.critic.layout,
        "episode": checkpoint.episode,
        "phi_scale": checkpoint.phi_scale,
        "rng_state": checkpoint.rng_state,
        "curve": checkpoint.curve,
        "config": checkpoint.config,
    }
    with file_path.open("wb") as fp:
        np.savez(
            fp,
            meta=np.array(json.dumps(meta)),
            actor_params=checkpoint.actor.params,
            actor_accumulators=checkpoint.actor.accumulators,
            critic_params=checkpoint.critic.params,
            critic_accumulators=checkpoint.critic.accumulators,
            episode_rewards=np.asarray(checkpoint.episode_rewards, dtype=np.float64),
        )
    return file_path


def load_checkpoint(path: str | Path) -> Checkpoint:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Checkpoint '{file_path}' does not exist")
    with np.load(file_path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        actor = PolicyNet(
            params=data["actor_params"], accumulators=data["actor_accumulators"], **meta["actor"]
        )
        critic = PolicyNet(
            params=data["critic_params"], accumulators=data["critic_accumulators"], **meta["critic"]
        )
        rewards = data["episode_rewards"].tolist()
    return Checkpoint(
        actor=actor,
        critic=critic,
        episode=int(meta["episode"]),
        phi_scale=float(meta["phi_scale"]),
        rng_state=meta["rng_state"],
        curve=list(meta.get("curve", [])),
        episode_rewards=rewards,
        config=dict(meta.get("config", {})),
    )


# --- training -----------------------------------------------------------------


@dataclass(slots=True)
class TrainingResult:
    actor: PolicyNet
    critic: PolicyNet
    phi_scale: float
    episodes: int
    curve: pd.DataFrame
    episode_rewards: List[float]
    checkpoint: Checkpoint

    def moving_average(self, window: int) -> float:
        tail = self.episode_rewards[-window:]
        return float(np.mean(tail)) if tail else float("nan")


class A2CTrainer:
    """Collects minibatches of episodes and applies synchronous updates."""

    def __init__(
        self,
        cfg: TrainerConfig,
        gen_cfg: GenConfig,
        params: RewardParams,
        train_seed_base: int = 1_000_000,
        jobs: int = 1,
    ) -> None:
        cfg.validate()
        gen_cfg.validate()
        self.cfg = cfg
        self.gen_cfg = gen_cfg
        self.params = params
        self.train_seed_base = train_seed_base
        self.jobs = max(1, int(jobs))
        self.logger = get_logger(self.__class__.__name__)

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def fresh_checkpoint(self) -> Checkpoint:
        cfg = self.cfg
        actor = init_network("actor", cfg.seed, hidden_size=cfg.hidden_size, fc_size=cfg.fc_size)
        critic = init_network("critic", cfg.seed + 1, hidden_size=cfg.hidden_size, fc_size=cfg.fc_size)
        phi_scale = cfg.phi_scale
        if phi_scale is None:
            sample = generate_dataset(self.gen_cfg, cfg.phi_scale_sample, self.train_seed_base)
            phi_scale = estimate_phi_scale(sample)
        rng = np.random.default_rng(cfg.seed)
        return Checkpoint(
            actor=actor,
            critic=critic,
            episode=0,
            phi_scale=float(phi_scale),
            rng_state=rng.bit_generator.state,
            config={"trainer": asdict(cfg), "generator": asdict(self.gen_cfg), "reward": asdict(self.params)},
        )

    def train(
        self,
        resume: Optional[Checkpoint] = None,
        checkpoint_path: Optional[str | Path] = None,
        on_update: Optional[Callable[[int, UpdateStats], None]] = None,
    ) -> TrainingResult:
        """Run until ``cfg.episodes`` episodes have been used for updates."""

        cfg = self.cfg
        state = resume if resume is not None else self.fresh_checkpoint()
        actor, critic = state.actor, state.critic
        rng = state.restore_rng()
        episode = state.episode
        curve = list(state.curve)
        episode_rewards = list(state.episode_rewards)
        self.logger.info(
            "Training A2C from episode %d to %d (phi_scale=%.4f, jobs=%d)",
            episode, cfg.episodes, state.phi_scale, self.jobs,
        )

        executor = ProcessPoolExecutor(max_workers=self.jobs) if self.jobs > 1 else None
        updates = 0
        next_checkpoint = (episode // cfg.checkpoint_every + 1) * cfg.checkpoint_every
        try:
            while episode < cfg.episodes:
                tasks = self._plan_tasks(rng, episode, min(cfg.minibatch_episodes, cfg.episodes - episode))
                batch = self._collect(executor, tasks, actor, critic, state.phi_scale)
                actor, critic, stats = a2c_update(actor, critic, batch, cfg)
                episode += len(batch)
                updates += 1

                rewards = [r.total_reward for r in batch]
                episode_rewards.extend(rewards)
                curve.append(
                    {
                        "episode": episode,
                        "mean_reward": float(np.mean(rewards)),
                        "policy_loss": stats.policy_loss,
                        "value_loss": stats.value_loss,
                        "entropy": stats.entropy,
                    }
                )
                if on_update is not None:
                    on_update(episode, stats)
                if updates % cfg.log_every == 0:
                    self.logger.info(
                        "episode %d | reward %.3f (avg %.3f) | policy %.4f | value %.4f | entropy %.4f",
                        episode,
                        curve[-1]["mean_reward"],
                        float(np.mean(episode_rewards[-cfg.curve_window :])),
                        stats.policy_loss,
                        stats.value_loss,
                        stats.entropy,
                    )

                state = Checkpoint(
                    actor=actor,
                    critic=critic,
                    episode=episode,
                    phi_scale=state.phi_scale,
                    rng_state=rng.bit_generator.state,
                    curve=curve,
                    episode_rewards=episode_rewards,
                    config=state.config,
                )
                if checkpoint_path is not None and episode >= next_checkpoint:
                    save_checkpoint(checkpoint_path, state)
                    self.logger.info("Checkpoint written at episode %d to %s", episode, checkpoint_path)
                    next_checkpoint = (episode // cfg.checkpoint_every + 1) * cfg.checkpoint_every
        finally:
            if executor is not None:
                executor.shutdown()

        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, state)
        return TrainingResult(
            actor=actor,
            critic=critic,
            phi_scale=state.phi_scale,
            episodes=episode,
            curve=pd.DataFrame(curve, columns=CURVE_COLUMNS),
            episode_rewards=episode_rewards,
            checkpoint=state,
        )

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _plan_tasks(self, rng: np.random.Generator, first_episode: int, count: int) -> List[EpisodeTask]:
        # drawn serially so the worker count never changes the sampled values
        fractions = self.cfg.budget_fractions
        tasks = []
        for k in range(count):
            fraction = float(fractions[int(rng.integers(len(fractions)))])
            tasks.append(
                EpisodeTask(
                    trace_seed=self.train_seed_base + first_episode + k,
                    budget_fraction=fraction,
                    episode_seed=int(rng.integers(2**62)),
                )
            )
        return tasks

    def _collect(
        self,
        executor: Optional[ProcessPoolExecutor],
        tasks: List[EpisodeTask],
        actor: PolicyNet,
        critic: PolicyNet,
        phi_scale: float,
    ) -> List[Rollout]:
        args = [(task, actor, critic, self.gen_cfg, self.params, phi_scale) for task in tasks]
        if executor is None:
            return [_run_task_packed(a) for a in args]
        return list(executor.map(_run_task_packed, args))


def train(
    cfg: TrainerConfig,
    gen_cfg: GenConfig,
    params: RewardParams,
    train_seed_base: int = 1_000_000,
    jobs: int = 1,
    resume: Optional[Checkpoint] = None,
    checkpoint_path: Optional[str | Path] = None,
) -> TrainingResult:
    """Train actor and critic; deterministic given ``cfg.seed``."""

    trainer = A2CTrainer(cfg, gen_cfg, params, train_seed_base=train_seed_base, jobs=jobs)
    return trainer.train(resume=resume, checkpoint_path=checkpoint_path)


def write_curve(curve: pd.DataFrame, path: str | Path) -> Path:
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(file_path, index=False, float_format="%.9g", columns=CURVE_COLUMNS)
    return file_path
