"""Offloading MDP: state, actions, trace-driven dynamics and reward.

An episode walks a :class:`Trace` one step at a time. At every step the
controller either reuses a cached prediction, runs the on-robot model or
spends one unit of the cloud query budget. The input stream does not react
to actions, so the dynamics are deterministic once the trace is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import EpisodeOverError, InvalidTraceError, PolicyContractError, TraceValidationError

NUM_ACTIONS = 4
NUM_FEATURES = 9


class Action(IntEnum):
    USE_PAST_ROBOT = 0
    USE_PAST_CLOUD = 1
    QUERY_ROBOT = 2
    QUERY_CLOUD = 3


def as_action(value: int) -> Action:
    """Coerce an integer code into an :class:`Action`."""

    try:
        return Action(int(value))
    except (TypeError, ValueError) as exc:
        raise PolicyContractError(f"Invalid action code {value!r}; expected one of 0-3") from exc


@dataclass(frozen=True, slots=True)
class TraceStep:
    """One timestep of the sensory stream with both models' outputs precomputed."""

    true_label: int
    robot_pred: int
    robot_conf: float
    cloud_pred: int
    cloud_conf: float
    phi: float

    def validate(self) -> None:
        if not 0.0 <= self.robot_conf <= 1.0:
            raise TraceValidationError(f"robot_conf must lie in [0, 1], got {self.robot_conf}")
        if not 0.0 <= self.cloud_conf <= 1.0:
            raise TraceValidationError(f"cloud_conf must lie in [0, 1], got {self.cloud_conf}")
        if not self.phi >= 0.0:
            raise TraceValidationError(f"phi must be non-negative, got {self.phi}")


@dataclass(frozen=True, slots=True)
class Trace:
    """An ordered input stream; its length is the episode horizon."""

    trace_id: str
    steps: Tuple[TraceStep, ...]
    seed: Optional[int] = None

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def labels(self) -> np.ndarray:
        return np.array([step.true_label for step in self.steps], dtype=np.int64)


@dataclass(frozen=True, slots=True)
class CachedPrediction:
    """Most recent output of one model and its age in timesteps."""

    label: Optional[int] = None
    conf: float = 0.0
    age: int = 0

    @property
    def is_empty(self) -> bool:
        return self.label is None

    def aged(self) -> "CachedPrediction":
        return replace(self, age=self.age + 1)


@dataclass(frozen=True, slots=True)
class OffloadState:
    phi_now: float
    phi_prev: float
    robot_cache: CachedPrediction
    cloud_cache: CachedPrediction
    budget_left: int
    time_left: int


@dataclass(slots=True)
class RewardParams:
    """Weights of the per-step penalty and the cost of each action."""

    alpha: float = 1.0
    beta: float = 7.0
    costs: Tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.4, 8.0))

    def __post_init__(self) -> None:
        self.costs = tuple(float(c) for c in self.costs)  # type: ignore[assignment]

    def cost(self, action: int) -> float:
        return self.costs[int(action)]

    @property
    def max_cost(self) -> float:
        return max(self.costs)

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be non-negative, got {self.alpha}, {self.beta}")
        if len(self.costs) != NUM_ACTIONS:
            raise ValueError(f"costs must hold {NUM_ACTIONS} entries, got {len(self.costs)}")
        if any(c < 0 for c in self.costs):
            raise ValueError(f"costs must be non-negative, got {self.costs}")


class StepInfo(NamedTuple):
    executed_action: Action
    loss: int
    pred_label: Optional[int]


class StepResult(NamedTuple):
    state: OffloadState
    reward: float
    done: bool
    info: StepInfo


def loss01(pred: Optional[int], truth: int) -> int:
    """Zero-one loss; a missing prediction always counts as wrong."""

    if pred is None:
        return 1
    return 0 if int(pred) == int(truth) else 1


def reward(params: RewardParams, loss: int, action: int) -> float:
    return -params.alpha * loss - params.beta * params.cost(action)


def executed_action(action: int, budget_left: int) -> Action:
    """Apply the budget remap: a cloud query with no budget runs the robot model."""

    action = as_action(action)
    if action is Action.QUERY_CLOUD and budget_left <= 0:
        return Action.QUERY_ROBOT
    return action


def select_prediction(
    state: OffloadState, step: TraceStep, action: Action
) -> Tuple[Optional[int], float]:
    if action is Action.USE_PAST_ROBOT:
        return state.robot_cache.label, state.robot_cache.conf
    if action is Action.USE_PAST_CLOUD:
        return state.cloud_cache.label, state.cloud_cache.conf
    if action is Action.QUERY_ROBOT:
        return step.robot_pred, step.robot_conf
    return step.cloud_pred, step.cloud_conf


def transition(
    state: OffloadState,
    step: TraceStep,
    next_phi: float,
    action: int,
    params: RewardParams,
) -> Tuple[OffloadState, float, StepInfo]:
    """Pure single-step dynamics shared by the environment and the oracles."""

    executed = executed_action(action, state.budget_left)
    label, _ = select_prediction(state, step, executed)
    loss = loss01(label, step.true_label)
    r = reward(params, loss, executed)

    robot_cache = state.robot_cache.aged()
    cloud_cache = state.cloud_cache.aged()
    budget_left = state.budget_left
    if executed is Action.QUERY_ROBOT:
        robot_cache = CachedPrediction(step.robot_pred, step.robot_conf, 0)
    elif executed is Action.QUERY_CLOUD:
        cloud_cache = CachedPrediction(step.cloud_pred, step.cloud_conf, 0)
        budget_left -= 1

    next_state = OffloadState(
        phi_now=next_phi,
        phi_prev=state.phi_now,
        robot_cache=robot_cache,
        cloud_cache=cloud_cache,
        budget_left=budget_left,
        time_left=state.time_left - 1,
    )
    return next_state, r, StepInfo(executed, loss, label)


def initial_state(trace: Trace, initial_budget: int) -> OffloadState:
    if trace.horizon == 0:
        raise InvalidTraceError(f"Trace '{trace.trace_id}' has no steps")
    if initial_budget < 0:
        raise ValueError(f"initial_budget must be non-negative, got {initial_budget}")
    sentinel = trace.horizon + 1
    return OffloadState(
        phi_now=trace.steps[0].phi,
        phi_prev=0.0,
        robot_cache=CachedPrediction(None, 0.0, sentinel),
        cloud_cache=CachedPrediction(None, 0.0, sentinel),
        budget_left=int(initial_budget),
        time_left=trace.horizon,
    )


class EpisodeEnv:
    """Episodic environment driven by a single trace.

    Instances share no mutable state, so separate environments may be stepped
    from different threads or processes. One instance is not thread safe.
    """

    def __init__(self, trace: Trace, initial_budget: int, params: RewardParams) -> None:
        self.trace = trace
        self.params = params
        self.initial_budget = int(initial_budget)
        self.state = initial_state(trace, initial_budget)
        self.t = 0

    @property
    def horizon(self) -> int:
        return self.trace.horizon

    @property
    def done(self) -> bool:
        return self.t >= self.horizon

    @property
    def current_step(self) -> TraceStep:
        self._ensure_running()
        return self.trace.steps[self.t]

    def resolve_prediction(self, action: int) -> Tuple[Optional[int], float]:
        return select_prediction(self.state, self.current_step, as_action(action))

    def step(self, action: int) -> StepResult:
        self._ensure_running()
        step = self.trace.steps[self.t]
        next_t = self.t + 1
        next_phi = self.trace.steps[next_t].phi if next_t < self.horizon else 0.0
        self.state, r, info = transition(self.state, step, next_phi, action, self.params)
        self.t = next_t
        return StepResult(self.state, r, self.done, info)

    def encode(self, phi_scale: float = 1.0) -> np.ndarray:
        return encode_state(self.state, self.horizon, self.initial_budget, phi_scale)

    def _ensure_running(self) -> None:
        if self.done:
            raise EpisodeOverError(
                f"Episode on trace '{self.trace.trace_id}' ended at t={self.horizon}"
            )


def reset(
    trace: Trace, initial_budget: int, params: RewardParams
) -> Tuple[EpisodeEnv, OffloadState]:
    env = EpisodeEnv(trace, initial_budget, params)
    return env, env.state


def resolve_prediction(env: EpisodeEnv, action: int) -> Tuple[Optional[int], float]:
    return env.resolve_prediction(action)


def step(env: EpisodeEnv, action: int) -> StepResult:
    return env.step(action)


def encode_state(
    state: OffloadState,
    horizon: int,
    initial_budget: int,
    phi_scale: float = 1.0,
) -> np.ndarray:
    """Featurize a state into nine values in [0, 1] for the policy network.

    Raw labels are left out so the input size does not depend on the number
    of classes; the agreement bit carries the only label information.
    """

    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    scale = phi_scale if phi_scale > 0 else 1.0
    robot, cloud = state.robot_cache, state.cloud_cache
    agree = float(robot.label is not None and cloud.label is not None and robot.label == cloud.label)
    features = np.array(
        [
            state.phi_now / scale,
            state.phi_prev / scale,
            robot.conf,
            cloud.conf,
            agree,
            min(robot.age, horizon) / horizon,
            min(cloud.age, horizon) / horizon,
            state.budget_left / max(1, initial_budget),
            state.time_left / horizon,
        ],
        dtype=np.float64,
    )
    return np.clip(features, 0.0, 1.0)


def step_reward_bounds(params: RewardParams) -> Tuple[float, float]:
    """Return the (lowest, highest) reward a single step can produce."""

    return -(params.alpha + params.beta * params.max_cost), 0.0


def count_cloud_queries(actions: Sequence[int]) -> int:
    return sum(1 for a in actions if int(a) == Action.QUERY_CLOUD)


def budget_from_fraction(fraction: float, horizon: int) -> int:
    """Round ``fraction * horizon`` half up to an integer query budget."""

    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"budget fraction must lie in [0, 1], got {fraction}")
    return int(np.floor(fraction * horizon + 0.5))
