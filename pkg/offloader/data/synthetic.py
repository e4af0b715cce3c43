"""Synthetic coherent input streams.

An episode is cut into consecutive intervals during which one identity stays
in view. The robot model only knows a subset of identities and is imperfect
on those; the cloud model plays a human oracle that is always right. The
frame-difference feature spikes at interval boundaries.
"""

from __future__ import annotations

from typing import Iterable, List

import numpy as np

from ..config import GenConfig
from ..mdp import Trace, TraceStep
from ..utils.logger import get_logger
from .base import TraceSource

logger = get_logger(__name__)


def trace_id_for(seed: int) -> str:
    return f"trace-{seed}"


def _sample_intervals(cfg: GenConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Return per-step identities and a boolean mask of interval starts."""

    lo, hi = cfg.interval_bounds
    labels = np.empty(cfg.T, dtype=np.int64)
    starts = np.zeros(cfg.T, dtype=bool)
    start = 0
    previous = -1
    while start < cfg.T:
        length = int(rng.integers(lo, hi + 1))
        if previous < 0:
            identity = int(rng.integers(cfg.num_identities))
        else:
            identity = int(rng.integers(cfg.num_identities - 1))
            if identity >= previous:
                identity += 1
        end = min(start + length, cfg.T)
        labels[start:end] = identity
        starts[start] = True
        previous = identity
        start = end
    return labels, starts


def generate_trace(cfg: GenConfig, seed: int) -> Trace:
    """Generate one trace; identical ``(cfg, seed)`` pairs give identical traces."""

    cfg.validate()
    rng = np.random.default_rng(seed)
    T = cfg.T
    labels, starts = _sample_intervals(cfg, rng)

    known = labels < cfg.num_known
    correct = known & (rng.random(T) < cfg.p_correct_known)
    # wrong answers are a known identity other than the truth
    shifted = rng.integers(cfg.num_known - 1, size=T)
    shifted = shifted + (shifted >= labels)
    any_known = rng.integers(cfg.num_known, size=T)
    robot_pred = np.where(correct, labels, np.where(known, shifted, any_known))

    conf_ok = rng.normal(cfg.conf_correct_mean, cfg.conf_correct_sd, size=T)
    conf_bad = rng.normal(cfg.conf_wrong_mean, cfg.conf_wrong_sd, size=T)
    robot_conf = np.clip(np.where(correct, conf_ok, conf_bad), 0.0, 1.0)

    phi_edge = rng.normal(cfg.phi_boundary_mean, cfg.phi_boundary_sd, size=T)
    phi_flat = rng.normal(cfg.phi_within_mean, cfg.phi_within_sd, size=T)
    phi = np.maximum(np.where(starts, phi_edge, phi_flat), 0.0)

    steps = tuple(
        TraceStep(
            true_label=int(labels[t]),
            robot_pred=int(robot_pred[t]),
            robot_conf=float(robot_conf[t]),
            cloud_pred=int(labels[t]),
            cloud_conf=float(cfg.cloud_conf),
            phi=float(phi[t]),
        )
        for t in range(T)
    )
    return Trace(trace_id=trace_id_for(seed), steps=steps, seed=int(seed))


def generate_dataset(cfg: GenConfig, n_traces: int, base_seed: int) -> List[Trace]:
    """Generate ``n_traces`` traces with consecutive seeds starting at ``base_seed``."""

    if n_traces < 1:
        raise ValueError(f"n_traces must be at least 1, got {n_traces}")
    logger.debug("Generating %d traces from seed %d", n_traces, base_seed)
    return [generate_trace(cfg, base_seed + i) for i in range(n_traces)]


def random_trace(rng: np.random.Generator, T: int, num_classes: int = 3, trace_id: str = "random") -> Trace:
    """Unstructured trace where either model may be wrong at any step."""

    labels = rng.integers(num_classes, size=T)
    steps = tuple(
        TraceStep(
            true_label=int(labels[t]),
            robot_pred=int(rng.integers(num_classes)),
            robot_conf=float(rng.random()),
            cloud_pred=int(rng.integers(num_classes)),
            cloud_conf=float(rng.random()),
            phi=float(rng.random()),
        )
        for t in range(T)
    )
    return Trace(trace_id=trace_id, steps=steps)


def estimate_phi_scale(traces: Iterable[Trace], percentile: float = 95.0) -> float:
    """Return the ``percentile`` of all φ values, used to normalize network inputs."""

    values = np.array([step.phi for trace in traces for step in trace.steps], dtype=np.float64)
    if values.size == 0:
        return 1.0
    scale = float(np.percentile(values, percentile))
    return scale if scale > 0 else 1.0


class SyntheticTraceSource(TraceSource):
    """Deterministic block of generated traces with consecutive seeds."""

    def __init__(self, cfg: GenConfig, base_seed: int, count: int) -> None:
        cfg.validate()
        self.cfg = cfg
        self.base_seed = base_seed
        self.count = count

    @property
    def seeds(self) -> range:
        return range(self.base_seed, self.base_seed + self.count)

    def get_traces(self) -> List[Trace]:
        return generate_dataset(self.cfg, self.count, self.base_seed)

    def describe(self) -> str:
        return f"synthetic seeds [{self.seeds.start}, {self.seeds.stop})"
