from __future__ import annotations

import logging

import numpy as np
import pytest

from conftest import make_trace
from offloader.data import generate_trace, random_trace
from offloader.errors import OracleSizeError
from offloader.evaluation import run_episode
from offloader.mdp import Action, RewardParams, budget_from_fraction
from offloader.policies import AllCloudPolicy, AllRobotPolicy, RandomPolicy, brute_force_oracle, oracle_dp, verify_oracle
from offloader.policies.oracle import OraclePolicy, replay, sample_reward_params
from offloader.policies.threshold import ThresholdPolicy, ThresholdPolicyConfig


def test_single_step_prefers_empty_cache_to_paying(params):
    trace = make_trace([1], robot=[0], cloud=[1])
    actions, value = brute_force_oracle(trace, params, 1)
    assert value == -1.0
    assert actions == [Action.USE_PAST_ROBOT]

    dp_actions, dp_value = oracle_dp(trace, params, 1)
    assert dp_value == -1.0
    assert dp_actions == [Action.USE_PAST_ROBOT]


def test_cheap_query_is_reused_across_an_interval():
    params = RewardParams(alpha=10.0, beta=1.0)
    trace = make_trace([3, 3, 3, 3], robot=[3, 0, 0, 0])
    actions, value = oracle_dp(trace, params, 0)

    assert actions == [Action.QUERY_ROBOT] + [Action.USE_PAST_ROBOT] * 3
    assert value == pytest.approx(-0.4)


def test_zero_budget_plans_contain_no_cloud_queries(params, gen_cfg):
    trace = generate_trace(gen_cfg, 11)
    actions, value = oracle_dp(trace, params, 0)
    assert Action.QUERY_CLOUD not in actions
    assert value == replay(trace, params, 0, actions)


@pytest.mark.parametrize("T,budget", [(1, 0), (3, 1), (6, 2), (7, 3)])
def test_dp_matches_brute_force_on_random_traces(T, budget):
    rng = np.random.default_rng([T, budget])
    for _ in range(5):
        params = sample_reward_params(rng)
        trace = random_trace(rng, T)
        _, dp_value = oracle_dp(trace, params, budget)
        _, brute_value = brute_force_oracle(trace, params, budget)
        assert dp_value == pytest.approx(brute_value, abs=1e-9)


def test_value_is_monotone_in_budget(params):
    rng = np.random.default_rng(8)
    custom = RewardParams(alpha=3.0, beta=0.5, costs=(0.0, 0.0, 0.6, 1.5))
    for p in (params, custom):
        trace = random_trace(rng, 12)
        values = [oracle_dp(trace, p, b)[1] for b in range(6)]
        assert all(later >= earlier - 1e-12 for earlier, later in zip(values, values[1:]))


def test_oracle_dominates_baselines(params, small_gen_cfg):
    policies = [
        RandomPolicy(),
        AllRobotPolicy(),
        AllRobotPolicy(hold=3, name="all-robot-3"),
        AllCloudPolicy(),
        ThresholdPolicy(ThresholdPolicyConfig(q=50, threshold=0.7)),
    ]
    oracle = OraclePolicy(params)
    rng = np.random.default_rng(0)
    for seed in range(100):
        trace = generate_trace(small_gen_cfg, seed) if seed % 2 else random_trace(rng, 12)
        fraction = (0.1, 0.2, 0.5, 0.7, 1.0)[seed % 5]
        ceiling = run_episode(oracle, trace, fraction, params).total_reward
        for policy in policies:
            outcome = run_episode(policy, trace, fraction, params, rng=np.random.default_rng(seed))
            assert outcome.total_reward <= ceiling + 1e-9


def test_plan_replays_to_reported_value(params, gen_cfg):
    trace = generate_trace(gen_cfg, 5)
    budget = budget_from_fraction(0.2, trace.horizon)
    actions, value = oracle_dp(trace, params, budget)

    assert len(actions) == trace.horizon
    assert sum(a is Action.QUERY_CLOUD for a in actions) <= budget
    assert replay(trace, params, budget, actions) == value


def test_size_limits(params, rng):
    with pytest.raises(OracleSizeError):
        brute_force_oracle(random_trace(rng, 11), params, 1)
    with pytest.raises(OracleSizeError):
        oracle_dp(random_trace(rng, 30), params, 1, max_horizon=20)
    with pytest.raises(OracleSizeError, match="limit of 200"):
        oracle_dp(random_trace(rng, 201), params, 201)


def test_table_sizes_are_logged_at_debug(params, rng, caplog):
    trace = random_trace(rng, 6, trace_id="sized")
    with caplog.at_level(logging.DEBUG, logger="offloader"):
        oracle_dp(trace, params, 2)

    sizes = [r for r in caplog.records if "Oracle tables for sized" in r.getMessage()]
    assert len(sizes) == 1
    assert sizes[0].levelno == logging.DEBUG
    assert "(3, 7, 7)" in sizes[0].getMessage()
    assert "273 bytes" in sizes[0].getMessage()


@pytest.mark.slow
def test_verification_harness_passes_on_default_instances():
    report = verify_oracle()
    assert report.total == 200
    assert report.passed
    assert report.summary() == "200/200 match"


def test_verification_is_reproducible():
    first = verify_oracle(instances=15, max_T=5, seed=3)
    second = verify_oracle(instances=15, max_T=5, seed=3)
    assert first.summary() == second.summary() == "15/15 match"


def test_verification_detects_a_faulty_oracle():
    def off_by_one(trace, params, budget):
        actions, value = oracle_dp(trace, params, budget)
        return actions, value - 1.0

    report = verify_oracle(instances=10, max_T=4, oracle=off_by_one)
    assert not report.passed
    assert report.summary() == "0/10 match"
    first = report.counterexamples[0]
    assert first.dp_value == pytest.approx(first.brute_value - 1.0)


def test_verification_detects_a_suboptimal_oracle():
    def robot_only(trace, params, budget):
        actions = [Action.QUERY_ROBOT] * trace.horizon
        return actions, replay(trace, params, budget, actions)

    report = verify_oracle(instances=30, max_T=6, oracle=robot_only)
    assert report.counterexamples
