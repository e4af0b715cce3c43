"""Offloader package: learning when a robot should ask the cloud for a prediction."""

from .config import BenchConfig, GenConfig, RunConfig, TrainerConfig
from .evaluation import BenchmarkReport, BenchmarkRunner, EpisodeResult, benchmark, export_report, run_episode
from .mdp import Action, EpisodeEnv, OffloadState, RewardParams, Trace, TraceStep, encode_state

__all__ = [
    "Action",
    "EpisodeEnv",
    "OffloadState",
    "RewardParams",
    "Trace",
    "TraceStep",
    "encode_state",
    "GenConfig",
    "TrainerConfig",
    "BenchConfig",
    "RunConfig",
    "EpisodeResult",
    "BenchmarkReport",
    "BenchmarkRunner",
    "benchmark",
    "run_episode",
    "export_report",
]
