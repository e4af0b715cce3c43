"""Exception hierarchy shared by the offloader package.

Library code raises these; only the command line front-end turns them into
exit codes.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Optional


class OffloaderError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(OffloaderError, ValueError):
    """A configuration value is missing, malformed or inconsistent."""


class InvalidTraceError(OffloaderError, ValueError):
    """A trace cannot drive an episode (for example it has no steps)."""


class TraceParseError(OffloaderError, ValueError):
    """A trace file line could not be decoded into a record."""

    def __init__(self, message: str, line_number: int, field: Optional[str] = None) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
        self.field = field


class TraceValidationError(OffloaderError, ValueError):
    """A decoded trace record violates a value constraint."""


class EpisodeOverError(OffloaderError, RuntimeError):
    """The environment was stepped after its final timestep."""


class OracleSizeError(OffloaderError, ValueError):
    """The instance is too large for the requested oracle."""


class CalibrationError(OffloaderError, ValueError):
    """Threshold calibration received no data."""


class PolicyContractError(OffloaderError, RuntimeError):
    """A policy returned something other than an action code 0-3."""


class ShapeError(OffloaderError, ValueError):
    """Array dimensions do not match the network layout."""


class TrainingDivergenceError(OffloaderError, RuntimeError):
    """A loss or gradient became non-finite during training."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


class InvariantViolation(OffloaderError, RuntimeError):
    """A benchmark invariant (budget, decomposition, dominance) failed."""


class MissingTracesError(OffloaderError, FileNotFoundError):
    """Trace files required by a command are not present."""

    def __init__(self, paths: Iterable[str]) -> None:
        self.paths = [str(path) for path in paths]
        super().__init__("Missing trace files; expected: " + ", ".join(self.paths))
