from __future__ import annotations

import logging
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_trace
from offloader.data import generate_dataset
from offloader.errors import CalibrationError
from offloader.mdp import Action, CachedPrediction, EpisodeEnv, initial_state
from offloader.policies import (
    AllCloudPolicy,
    AllRobotPolicy,
    LearnedPolicy,
    RandomPolicy,
    ThresholdPolicy,
    ThresholdPolicyConfig,
    act_greedy,
    all_cloud_policy,
    all_robot_policy,
    calibrate_threshold,
    greedy_action,
    random_policy,
    threshold_policy,
)
from offloader.rl import PolicyNet, init_network


def _state(budget_left=3, robot_cache=None, T=80):
    state = initial_state(make_trace([0] * T), budget_left)
    if robot_cache is not None:
        state = replace(state, robot_cache=robot_cache)
    return state


def _play(policy, trace, budget, params, rng=None):
    env = EpisodeEnv(trace, budget, params)
    policy.begin_episode(trace, budget, rng)
    executed = []
    while not env.done:
        executed.append(env.step(policy.decide(env.state, env.t).action).info.executed_action)
    return executed


def test_random_policy_is_uniform_over_available_actions():
    rng = np.random.default_rng(0)
    with_budget = Counter(random_policy(_state(3), rng) for _ in range(8000))
    without = Counter(random_policy(_state(0), rng) for _ in range(6000))

    for action in Action:
        assert with_budget[action] / 8000 == pytest.approx(0.25, abs=0.03)
    assert without[Action.QUERY_CLOUD] == 0
    for action in (Action.USE_PAST_ROBOT, Action.USE_PAST_CLOUD, Action.QUERY_ROBOT):
        assert without[action] / 6000 == pytest.approx(1 / 3, abs=0.03)


def test_random_policy_is_reproducible():
    first = [random_policy(_state(), np.random.default_rng(5)) for _ in range(3)]
    second = [random_policy(_state(), np.random.default_rng(5)) for _ in range(3)]
    assert first == second


def test_random_policy_class_needs_a_generator(params):
    policy = RandomPolicy()
    policy.begin_episode(make_trace([1, 1]), 1, rng=None)
    with pytest.raises(RuntimeError):
        policy.decide(_state(), 0)


def test_all_robot_hold_logic():
    assert all_robot_policy(_state(), hold=4) is Action.QUERY_ROBOT
    assert all_robot_policy(_state(robot_cache=CachedPrediction(1, 0.9, 2)), hold=4) is Action.USE_PAST_ROBOT
    assert all_robot_policy(_state(robot_cache=CachedPrediction(1, 0.9, 0)), hold=1) is Action.QUERY_ROBOT
    with pytest.raises(ValueError):
        all_robot_policy(_state(), hold=0)


def test_all_robot_with_hold_one_queries_every_step(params):
    executed = _play(AllRobotPolicy(hold=1), make_trace([1] * 80), 10, params)
    assert executed == [Action.QUERY_ROBOT] * 80


def test_all_robot_hold_reuses_each_output(params):
    executed = _play(AllRobotPolicy(hold=3), make_trace([1] * 7), 0, params)
    assert executed == [2, 0, 0, 2, 0, 0, 2]


def test_all_cloud_period():
    state = _state(16)
    queries = [t for t in range(80) if all_cloud_policy(state, t, 80, 16) is Action.QUERY_CLOUD]
    assert queries == list(range(0, 80, 5))
    assert all(all_cloud_policy(_state(80), t, 80, 80) is Action.QUERY_CLOUD for t in range(80))


def test_all_cloud_holds_when_budget_is_gone():
    assert all_cloud_policy(_state(0), 0, 80, 16) is Action.USE_PAST_CLOUD
    assert all_cloud_policy(_state(0), 0, 80, 0) is Action.USE_PAST_CLOUD


def test_all_cloud_never_exceeds_budget(params):
    trace = make_trace([2] * 80)
    for budget in (0, 1, 3, 8, 16, 56, 80):
        executed = _play(AllCloudPolicy(), trace, budget, params)
        assert executed.count(Action.QUERY_CLOUD) <= budget


def test_all_cloud_warns_when_it_cannot_query(caplog):
    policy = AllCloudPolicy()
    with caplog.at_level(logging.DEBUG, logger="offloader"):
        policy.begin_episode(make_trace([1, 1], trace_id="broke"), 0)
        policy.begin_episode(make_trace([1, 1], trace_id="funded"), 1)

    warnings = [r for r in caplog.records if r.levelno == logging.WARNING]
    assert len(warnings) == 1
    assert "Budget 0 on broke" in warnings[0].getMessage()


def test_calibration_percentiles():
    flat = [make_trace([0] * 4, robot_conf=[0.7] * 4)]
    assert calibrate_threshold(flat, 10).threshold == pytest.approx(0.7)

    spread = [make_trace([0] * 4, robot_conf=[0.2, 0.4, 0.6, 0.8])]
    assert calibrate_threshold(spread, 50).threshold == pytest.approx(0.5)
    assert calibrate_threshold(spread, 0).threshold == pytest.approx(0.2)
    assert calibrate_threshold(spread, 100).threshold == pytest.approx(0.8)


def test_calibration_errors():
    with pytest.raises(CalibrationError):
        calibrate_threshold([], 50)
    with pytest.raises(CalibrationError):
        calibrate_threshold([make_trace([0])], 101)


def test_threshold_rule():
    cfg = ThresholdPolicyConfig(q=50, threshold=0.5)
    assert threshold_policy(_state(2), 0.3, cfg) is Action.QUERY_CLOUD
    assert threshold_policy(_state(0), 0.3, cfg) is Action.QUERY_ROBOT
    assert threshold_policy(_state(2), 0.9, cfg) is Action.QUERY_ROBOT


def test_threshold_offload_rate_matches_percentile(gen_cfg):
    traces = generate_dataset(gen_cfg, 50, 10)
    cfg = calibrate_threshold(traces, 25)
    unconstrained = _state(10**6)
    decisions = [threshold_policy(unconstrained, s.robot_conf, cfg) for t in traces for s in t.steps]
    rate = decisions.count(Action.QUERY_CLOUD) / len(decisions)
    assert rate == pytest.approx(0.25, abs=0.02)


def test_threshold_policy_reads_current_confidence(params):
    trace = make_trace([1, 1, 1], robot_conf=[0.2, 0.9, 0.1])
    policy = ThresholdPolicy(ThresholdPolicyConfig(q=50, threshold=0.5))
    assert policy.name == "threshold-q50"
    assert _play(policy, trace, 1, params) == [Action.QUERY_CLOUD, Action.QUERY_ROBOT, Action.QUERY_ROBOT]


def test_greedy_action_breaks_ties_low():
    assert greedy_action(np.array([0.25, 0.25, 0.25, 0.25])) is Action.USE_PAST_ROBOT
    assert greedy_action(np.array([0.1, 0.2, 0.6, 0.1])) is Action.QUERY_ROBOT


def test_learned_policy_matches_act_greedy(params, small_gen_cfg):
    actor = init_network("actor", seed=3, hidden_size=8, fc_size=16)
    trace = generate_dataset(small_gen_cfg, 1, 77)[0]

    expected = act_greedy(actor, EpisodeEnv(trace, 3, params), phi_scale=0.9)
    played = _play(LearnedPolicy(actor, phi_scale=0.9), trace, 3, params)
    requested = []
    policy = LearnedPolicy(actor, phi_scale=0.9)
    env = EpisodeEnv(trace, 3, params)
    policy.begin_episode(trace, 3)
    while not env.done:
        action = policy.decide(env.state, env.t).action
        requested.append(action)
        env.step(action)

    assert requested == expected
    assert len(played) == trace.horizon


def test_zero_actor_picks_first_action(params):
    policy = LearnedPolicy(PolicyNet("actor"))
    assert _play(policy, make_trace([1, 2, 3]), 1, params) == [Action.USE_PAST_ROBOT] * 3


def test_learned_policy_requires_an_actor():
    with pytest.raises(ValueError):
        LearnedPolicy(PolicyNet("critic"))
