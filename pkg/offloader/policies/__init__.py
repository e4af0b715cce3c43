"""Offloading policies: baselines, confidence threshold, oracle and learned."""

from .base import BaseOffloadPolicy, PolicyDecision
from .baselines import (
    AllCloudPolicy,
    AllRobotPolicy,
    RandomPolicy,
    all_cloud_policy,
    all_robot_policy,
    random_policy,
)
from .learned import LearnedPolicy, act_greedy, greedy_action
from .oracle import OraclePolicy, brute_force_oracle, oracle_dp, verify_oracle
from .threshold import ThresholdPolicy, ThresholdPolicyConfig, calibrate_threshold, threshold_policy

__all__ = [
    "BaseOffloadPolicy",
    "PolicyDecision",
    "RandomPolicy",
    "AllRobotPolicy",
    "AllCloudPolicy",
    "ThresholdPolicy",
    "ThresholdPolicyConfig",
    "OraclePolicy",
    "LearnedPolicy",
    "random_policy",
    "all_robot_policy",
    "all_cloud_policy",
    "calibrate_threshold",
    "threshold_policy",
    "oracle_dp",
    "brute_force_oracle",
    "verify_oracle",
    "act_greedy",
    "greedy_action",
]
