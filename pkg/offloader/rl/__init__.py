"""Recurrent advantage actor-critic for the offloading controller."""

from .a2c import Rollout, UpdateStats, a2c_update, clip_by_global_norm, returns_and_advantages
from .network import PolicyNet, init_network
from .trainer import A2CTrainer, Checkpoint, TrainingResult, load_checkpoint, save_checkpoint, train

__all__ = [
    "PolicyNet",
    "init_network",
    "Rollout",
    "UpdateStats",
    "a2c_update",
    "clip_by_global_norm",
    "returns_and_advantages",
    "A2CTrainer",
    "Checkpoint",
    "TrainingResult",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
