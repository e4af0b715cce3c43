"""Base policy definitions for the offloading controller."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..mdp import Action, OffloadState, Trace


@dataclass(slots=True)
class PolicyDecision:
    action: Action
    aux: Dict[str, Any] = field(default_factory=dict)


class BaseOffloadPolicy(ABC):
    """Abstract base class for offloading policies.

    A policy sees one episode at a time: :meth:`begin_episode` hands it the
    trace, the query budget and a random generator, then :meth:`decide` is
    called once per timestep with the current state.
    """

    name: str
    #: stochastic policies are re-run for every benchmark trial
    stochastic: bool = False
    #: baselines take part in the "best baseline" comparison
    is_baseline: bool = True

    def __init__(self, name: str) -> None:
        self.name = name
        self.trace: Optional[Trace] = None
        self.budget: int = 0
        self.rng: Optional[np.random.Generator] = None

    @property
    def horizon(self) -> int:
        return self.trace.horizon if self.trace is not None else 0

    def begin_episode(
        self,
        trace: Trace,
        budget: int,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.trace = trace
        self.budget = int(budget)
        self.rng = rng

    @abstractmethod
    def decide(self, state: OffloadState, t: int) -> PolicyDecision:
        """Choose the action for timestep ``t`` given the current state."""

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name={self.name!r})"
