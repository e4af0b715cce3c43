"""Confidence-threshold heuristic: offload the least-confident robot outputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

import numpy as np

from ..errors import CalibrationError
from ..mdp import Action, OffloadState, Trace
from .base import BaseOffloadPolicy, PolicyDecision


@dataclass(frozen=True, slots=True)
class ThresholdPolicyConfig:
    q: float
    threshold: float


def calibrate_threshold(traces: Sequence[Trace], q: float) -> ThresholdPolicyConfig:
    """Set the threshold to the ``q``-th percentile of robot confidences.

    Percentiles use linear interpolation between order statistics.
    """

    if not 0 <= q <= 100:
        raise CalibrationError(f"percentile must lie in [0, 100], got {q}")
    confidences = np.array([step.robot_conf for trace in traces for step in trace.steps], dtype=np.float64)
    if confidences.size == 0:
        raise CalibrationError("Cannot calibrate a threshold without any trace steps")
    return ThresholdPolicyConfig(q=float(q), threshold=float(np.percentile(confidences, q)))


def calibrate_sweep(traces: Sequence[Trace], percentiles: Iterable[float]) -> Dict[float, ThresholdPolicyConfig]:
    return {float(q): calibrate_threshold(traces, q) for q in percentiles}


def threshold_policy(state: OffloadState, step_robot_conf: float, cfg: ThresholdPolicyConfig) -> Action:
    """Send low-confidence steps to the cloud while budget remains.

    The robot model is assumed to run at every step, so cached predictions
    are never used.
    """

    if step_robot_conf < cfg.threshold and state.budget_left > 0:
        return Action.QUERY_CLOUD
    return Action.QUERY_ROBOT


class ThresholdPolicy(BaseOffloadPolicy):
    def __init__(self, cfg: ThresholdPolicyConfig, name: str | None = None) -> None:
        super().__init__(name or f"threshold-q{cfg.q:g}")
        self.cfg = cfg

    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        if self.trace is None:
            raise RuntimeError("begin_episode must be called before decide")
        conf = self.trace.steps[t].robot_conf
        return PolicyDecision(threshold_policy(state, conf, self.cfg), {"threshold": self.cfg.threshold, "conf": conf})
