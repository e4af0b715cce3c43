"""Clairvoyant oracle: the best action sequence for a fully known trace.

``oracle_dp`` solves the problem exactly by backward induction over
``(t, budget left, robot cache source, cloud cache source)``. A cache source is
either empty or the step at which that model was last queried, which is all
that is needed to score a cached prediction against later labels.
``brute_force_oracle`` enumerates every action sequence and exists to
cross-check the DP on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..data.synthetic import random_trace
from ..errors import InvalidTraceError, OracleSizeError
from ..mdp import Action, EpisodeEnv, OffloadState, RewardParams, Trace, initial_state, transition
from ..utils.logger import get_logger
from .base import BaseOffloadPolicy, PolicyDecision

logger = get_logger(__name__)

BRUTE_FORCE_LIMIT = 10
VALUE_TOLERANCE = 1e-9

OracleFn = Callable[[Trace, RewardParams, int], Tuple[List[Action], float]]


def replay(trace: Trace, params: RewardParams, budget: int, actions: Sequence[int]) -> float:
    """Total reward of ``actions`` on ``trace``, summed in time order."""

    env = EpisodeEnv(trace, budget, params)
    total = 0.0
    for action in actions:
        total += env.step(action).reward
    return total


def oracle_dp(
    trace: Trace,
    params: RewardParams,
    budget: int,
    max_horizon: int = 200,
) -> Tuple[List[Action], float]:
    """Return an optimal action sequence and its total reward.

    Ties are broken towards the smallest action code. Runs in
    ``O(T^3 * budget * 4)`` time. The per-step choice tables hold
    ``(budget + 1) * T * (T + 1) * (2T + 1) / 6`` bytes in total, about 540 MB at
    ``T = budget = 200``; the float value tables add ``8 * (budget + 1) * (T + 1)^2``
    bytes per live temporary. Lower ``max_horizon`` on small machines.
    """

    T = trace.horizon
    if T == 0:
        raise InvalidTraceError(f"Trace '{trace.trace_id}' has no steps")
    if T > max_horizon:
        raise OracleSizeError(f"Horizon {T} exceeds the oracle limit of {max_horizon}")
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")

    n_budget = min(int(budget), T)
    y = np.array([s.true_label for s in trace.steps])
    robot = np.array([s.robot_pred for s in trace.steps])
    cloud = np.array([s.cloud_pred for s in trace.steps])
    alpha, beta = params.alpha, params.beta
    costs = [beta * params.cost(a) for a in Action]

    # index 0 is an empty cache, index s + 1 a prediction captured at step s
    value_next = np.zeros((n_budget + 1, T + 1, T + 1))
    choices: List[np.ndarray] = [np.empty(0, dtype=np.int8)] * T
    logger.debug(
        "Oracle tables for %s: value %s float64, choices %d bytes int8",
        trace.trace_id,
        value_next.shape,
        (n_budget + 1) * T * (T + 1) * (2 * T + 1) // 6,
    )
    for t in range(T - 1, -1, -1):
        n = t + 1
        loss_robot = np.ones(n)
        loss_robot[1:] = robot[:t] != y[t]
        loss_cloud = np.ones(n)
        loss_cloud[1:] = cloud[:t] != y[t]
        hold = value_next[:, :n, :n]

        q0 = hold - alpha * loss_robot[None, :, None] - costs[0]
        q1 = hold - alpha * loss_cloud[None, None, :] - costs[1]
        r2 = -alpha * float(robot[t] != y[t]) - costs[2]
        q2 = np.broadcast_to(r2 + value_next[:, n, :n][:, None, :], q0.shape)
        q3 = np.array(q2)
        if n_budget > 0:
            r3 = -alpha * float(cloud[t] != y[t]) - costs[3]
            q3[1:] = r3 + value_next[:-1, :n, n][:, :, None]

        best = q0.copy()
        choice = np.zeros(best.shape, dtype=np.int8)
        for code, q in ((1, q1), (2, q2), (3, q3)):
            better = q > best
            best = np.where(better, q, best)
            choice[better] = code
        choices[t] = choice
        value_next = best

    actions: List[Action] = []
    left, src_robot, src_cloud = n_budget, 0, 0
    for t in range(T):
        action = Action(int(choices[t][left, src_robot, src_cloud]))
        if action is Action.QUERY_ROBOT:
            src_robot = t + 1
        elif action is Action.QUERY_CLOUD:
            src_cloud = t + 1
            left -= 1
        actions.append(action)

    value = replay(trace, params, budget, actions)
    planned = float(value_next[n_budget, 0, 0])
    if abs(value - planned) > 1e-6:
        raise RuntimeError(f"Oracle plan replays to {value}, expected {planned}")
    logger.debug("Oracle on %s (T=%d, budget=%d): %.6f", trace.trace_id, T, budget, value)
    return actions, value


def brute_force_oracle(trace: Trace, params: RewardParams, budget: int) -> Tuple[List[Action], float]:
    """Exhaustive search over all ``4**T`` sequences (``T <= 10``)."""

    T = trace.horizon
    if T == 0:
        raise InvalidTraceError(f"Trace '{trace.trace_id}' has no steps")
    if T > BRUTE_FORCE_LIMIT:
        raise OracleSizeError(f"Brute force is limited to T <= {BRUTE_FORCE_LIMIT}, got {T}")

    steps = trace.steps
    next_phi = [steps[t + 1].phi if t + 1 < T else 0.0 for t in range(T)]
    best_value = -np.inf
    best_actions: List[Action] = []
    prefix: List[Action] = []

    def visit(t: int, state: OffloadState, total: float) -> None:
        nonlocal best_value, best_actions
        if t == T:
            if total > best_value:
                best_value, best_actions = total, list(prefix)
            return
        for action in Action:
            following, r, info = transition(state, steps[t], next_phi[t], action, params)
            if info.executed_action is Action.QUERY_CLOUD and following.budget_left < 0:
                continue
            prefix.append(action)
            visit(t + 1, following, total + r)
            prefix.pop()

    visit(0, initial_state(trace, budget), 0.0)
    return best_actions, float(best_value)


class OraclePolicy(BaseOffloadPolicy):
    """Replays the DP plan computed from the whole trace at episode start."""

    is_baseline = False

    def __init__(self, params: RewardParams, max_horizon: int = 200, name: str = "Oracle") -> None:
        super().__init__(name)
        self.params = params
        self.max_horizon = max_horizon
        self.plan: List[Action] = []
        self.value: float = 0.0

    def begin_episode(self, trace, budget, rng=None) -> None:  # type: ignore[override]
        super().begin_episode(trace, budget, rng)
        self.plan, self.value = oracle_dp(trace, self.params, budget, self.max_horizon)

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        return PolicyDecision(self.plan[t], {"planned_value": self.value})


# --- verification harness ---------------------------------------------------


@dataclass(slots=True)
class OracleCounterexample:
    index: int
    trace: Trace
    budget: int
    params: RewardParams
    dp_value: float
    brute_value: float


@dataclass(slots=True)
class OracleCheckReport:
    total: int = 0
    matched: int = 0
    counterexamples: List[OracleCounterexample] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.matched == self.total

    def summary(self) -> str:
        return f"{self.matched}/{self.total} match"


def sample_reward_params(rng: np.random.Generator) -> RewardParams:
    """Random weights under which both query types can pay off."""

    return RewardParams(
        alpha=float(rng.uniform(0.5, 5.0)),
        beta=float(rng.uniform(0.1, 2.0)),
        costs=(0.0, 0.0, float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 3.0))),
    )


def verify_oracle(
    instances: int = 200,
    max_T: int = 8,
    max_budget: int = 3,
    seed: int = 0,
    params: Optional[RewardParams] = None,
    oracle: OracleFn = oracle_dp,
    reference: OracleFn = brute_force_oracle,
    num_classes: int = 3,
) -> OracleCheckReport:
    """Compare ``oracle`` against exhaustive search on random small instances.

    Even-numbered instances use ``params`` (the default constants by
    default); odd ones draw random weights so that queries are worthwhile.
    """

    base_params = params or RewardParams()
    report = OracleCheckReport()
    for index in range(instances):
        rng = np.random.default_rng([seed, index])
        T = int(rng.integers(1, max_T + 1))
        budget = int(rng.integers(0, min(max_budget, T) + 1))
        case_params = base_params if index % 2 == 0 else sample_reward_params(rng)
        trace = random_trace(rng, T, num_classes, trace_id=f"oracle-check-{seed}-{index}")
        _, dp_value = oracle(trace, case_params, budget)
        _, brute_value = reference(trace, case_params, budget)
        report.total += 1
        if abs(dp_value - brute_value) <= VALUE_TOLERANCE:
            report.matched += 1
        else:
            logger.warning(
                "Oracle mismatch on instance %d: dp=%.12f brute=%.12f", index, dp_value, brute_value
            )
            report.counterexamples.append(
                OracleCounterexample(index, trace, budget, case_params, dp_value, brute_value)
            )
    return report
