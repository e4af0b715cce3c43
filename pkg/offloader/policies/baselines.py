"""Simple benchmark policies: random, robot-only and periodic cloud."""

from __future__ import annotations

import math

import numpy as np

from ..mdp import Action, OffloadState
from ..utils.logger import get_logger
from .base import BaseOffloadPolicy, PolicyDecision


def random_policy(state: OffloadState, rng: np.random.Generator) -> Action:
    """Uniform over all four actions, or over 0-2 once the budget is spent."""

    choices = 4 if state.budget_left > 0 else 3
    return Action(int(rng.integers(choices)))


def all_robot_policy(state: OffloadState, hold: int = 1) -> Action:
    """Run the robot model and let each output serve ``hold`` consecutive steps.

    A query leaves the cache at age 0 on the following step, so the output is
    still fresh enough while ``age + 1 < hold``.
    """

    if hold < 1:
        raise ValueError(f"hold must be at least 1, got {hold}")
    cache = state.robot_cache
    if cache.is_empty or cache.age + 1 >= hold:
        return Action.QUERY_ROBOT
    return Action.USE_PAST_ROBOT


def cloud_period(T: int, budget: int) -> int:
    return math.ceil(T / max(1, budget))


def all_cloud_policy(state: OffloadState, t: int, T: int, budget: int) -> Action:
    """Query the cloud every ``ceil(T / budget)`` steps and hold the answer."""

    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    if budget == 0 or state.budget_left <= 0:
        return Action.USE_PAST_CLOUD
    if t % cloud_period(T, budget) == 0:
        return Action.QUERY_CLOUD
    return Action.USE_PAST_CLOUD


class RandomPolicy(BaseOffloadPolicy):
    stochastic = True

    def __init__(self, name: str = "random") -> None:
        super().__init__(name)

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        if self.rng is None:
            raise RuntimeError("RandomPolicy needs a random generator; pass rng to begin_episode")
        return PolicyDecision(random_policy(state, self.rng))


class AllRobotPolicy(BaseOffloadPolicy):
    def __init__(self, hold: int = 1, name: str = "all-robot") -> None:
        if hold < 1:
            raise ValueError(f"hold must be at least 1, got {hold}")
        super().__init__(name)
        self.hold = hold

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        return PolicyDecision(all_robot_policy(state, self.hold))


class AllCloudPolicy(BaseOffloadPolicy):
    def __init__(self, name: str = "all-cloud") -> None:
        super().__init__(name)
        self.logger = get_logger(self.__class__.__name__)

    def begin_episode(self, trace, budget, rng=None) -> None:  # type: ignore[override]
        super().begin_episode(trace, budget, rng)
        if budget == 0:
            self.logger.warning(
                "Budget 0 on %s: all-cloud only holds empty predictions", trace.trace_id
            )

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        action = all_cloud_policy(state, t, self.horizon, self.budget)
        return PolicyDecision(action, {"period": cloud_period(self.horizon, self.budget)})
