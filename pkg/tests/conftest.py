from __future__ import annotations

from typing import Sequence

import numpy as np
import pytest

from offloader.config import GenConfig, RunConfig
from offloader.mdp import RewardParams, Trace, TraceStep


def make_trace(
    labels: Sequence[int],
    robot: Sequence[int] | None = None,
    cloud: Sequence[int] | None = None,
    robot_conf: Sequence[float] | None = None,
    phi: Sequence[float] | None = None,
    trace_id: str = "hand",
) -> Trace:
    """Build a trace from per-step lists; unspecified models are always right."""

    T = len(labels)
    robot = list(labels) if robot is None else robot
    cloud = list(labels) if cloud is None else cloud
    robot_conf = [0.9] * T if robot_conf is None else robot_conf
    phi = [0.1] * T if phi is None else phi
    steps = tuple(
        TraceStep(
            true_label=int(labels[t]),
            robot_pred=int(robot[t]),
            robot_conf=float(robot_conf[t]),
            cloud_pred=int(cloud[t]),
            cloud_conf=1.0,
            phi=float(phi[t]),
        )
        for t in range(T)
    )
    return Trace(trace_id=trace_id, steps=steps)


@pytest.fixture
def params() -> RewardParams:
    return RewardParams()


@pytest.fixture
def gen_cfg() -> GenConfig:
    return GenConfig()


@pytest.fixture
def small_gen_cfg() -> GenConfig:
    return GenConfig(T=12)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_run_config(tmp_path) -> RunConfig:
    """A configuration small enough for end-to-end command tests."""

    config = RunConfig(out_dir=str(tmp_path / "run"), jobs=1)
    config.generator.T = 12
    config.bench.train_count = 6
    config.bench.test_count = 4
    config.bench.trials = 2
    config.bench.budget_fractions = (0.2, 1.0)
    config.bench.threshold_percentiles = (25, 75)
    config.bench.oracle_check_instances = 20
    config.bench.oracle_check_max_T = 5
    config.trainer.episodes = 20
    config.trainer.minibatch_episodes = 10
    config.trainer.hidden_size = 8
    config.trainer.fc_size = 16
    config.trainer.phi_scale_sample = 5
    config.trainer.checkpoint_every = 10
    config.trainer.budget_fractions = (0.2, 1.0)
    return config
