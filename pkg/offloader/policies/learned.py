"""Greedy evaluation of a trained recurrent actor."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from ..mdp import Action, EpisodeEnv, OffloadState, encode_state
from ..rl.network import PolicyNet
from .base import BaseOffloadPolicy, PolicyDecision


def greedy_action(probs: np.ndarray) -> Action:
    """Most probable action; ties go to the smallest code."""

    return Action(int(np.argmax(probs)))


def act_greedy(actor: PolicyNet, env: EpisodeEnv, phi_scale: float = 1.0) -> List[Action]:
    """Drive ``env`` to termination with greedy actor decisions."""

    h, c = actor.initial_state(1)
    actions: List[Action] = []
    while not env.done:
        probs, h, c = actor.step(env.encode(phi_scale)[None, :], h, c)
        action = greedy_action(probs[0])
        env.step(action)
        actions.append(action)
    return actions


class LearnedPolicy(BaseOffloadPolicy):
    """Wraps an actor network; the LSTM state is carried across one episode."""

    is_baseline = False

    def __init__(self, actor: PolicyNet, phi_scale: float = 1.0, name: str = "RL") -> None:
        if actor.kind != "actor":
            raise ValueError("LearnedPolicy needs an actor network")
        super().__init__(name)
        self.actor = actor
        self.phi_scale = phi_scale
        self._h: Optional[np.ndarray] = None
        self._c: Optional[np.ndarray] = None

    def begin_episode(self, trace, budget, rng=None) -> None:  # type: ignore[override]
        super().begin_episode(trace, budget, rng)
        self._h, self._c = self.actor.initial_state(1)

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        if self._h is None or self._c is None:
            raise RuntimeError("begin_episode must be called before decide")
        x = encode_state(state, self.horizon, self.budget, self.phi_scale)
        probs, self._h, self._c = self.actor.step(x[None, :], self._h, self._c)
        return PolicyDecision(greedy_action(probs[0]), {"probs": probs[0]})
