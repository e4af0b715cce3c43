"""Abstract base classes for trace providers."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import List

from ..mdp import Trace


class TraceSource(ABC):
    """Interface for obtaining the input streams that drive episodes."""

    @abstractmethod
    def get_traces(self) -> List[Trace]:
        """Return the traces of this source in a stable order.

        Implementations must be deterministic: two calls return equal traces.
        """

    def describe(self) -> str:
        return self.__class__.__name__
