"""Line-delimited JSON trace files.

Each trace is a header record followed by one record per step::

    {"type": "trace", "id": "trace-5000", "T": 80, "seed": 5000}
    {"type": "step", "t": 0, "true_label": 3, "robot_pred": 3, ...}

The format is the ingestion point for prediction logs produced by real
vision models.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from ..errors import MissingTracesError, TraceParseError, TraceValidationError
from ..mdp import Trace, TraceStep
from ..utils.logger import get_logger
from .base import TraceSource

logger = get_logger(__name__)

STEP_FIELDS = ("true_label", "robot_pred", "robot_conf", "cloud_pred", "cloud_conf", "phi")
_INT_FIELDS = {"true_label", "robot_pred", "cloud_pred"}


def _trace_records(trace: Trace) -> Iterable[Dict[str, Any]]:
    yield {"type": "trace", "id": trace.trace_id, "T": trace.horizon, "seed": trace.seed}
    for t, step in enumerate(trace.steps):
        yield {
            "type": "step",
            "t": t,
            "true_label": step.true_label,
            "robot_pred": step.robot_pred,
            "robot_conf": step.robot_conf,
            "cloud_pred": step.cloud_pred,
            "cloud_conf": step.cloud_conf,
            "phi": step.phi,
        }


def save_traces(traces: Iterable[Trace], path: str | Path) -> Path:
    """Write traces to ``path``, creating parent directories as needed."""

    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with file_path.open("w", encoding="utf-8", newline="\n") as fp:
        for trace in traces:
            for record in _trace_records(trace):
                fp.write(json.dumps(record, allow_nan=False))
                fp.write("\n")
            count += 1
    logger.debug("Wrote %d traces to %s", count, file_path)
    return file_path


def _field(record: Dict[str, Any], name: str, line_number: int) -> Any:
    if name not in record:
        raise TraceParseError(f"record is missing field '{name}'", line_number, field=name)
    return record[name]


def _is_integral(value: Any) -> bool:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    return isinstance(value, int) or value.is_integer()


def _int_field(record: Dict[str, Any], name: str, line_number: int, minimum: int = 0) -> int:
    value = _field(record, name, line_number)
    if not _is_integral(value):
        raise TraceParseError(f"field '{name}' must be an integer, got {value!r}", line_number, field=name)
    if value < minimum:
        raise TraceParseError(f"field '{name}' must be at least {minimum}, got {value!r}", line_number, field=name)
    return int(value)


def _parse_step(record: Dict[str, Any], line_number: int) -> TraceStep:
    values: Dict[str, Any] = {}
    for name in STEP_FIELDS:
        value = _field(record, name, line_number)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TraceParseError(f"field '{name}' must be numeric, got {value!r}", line_number, field=name)
        if name in _INT_FIELDS:
            if not _is_integral(value):
                raise TraceParseError(f"field '{name}' must be an integer class id", line_number, field=name)
            value = int(value)
        else:
            value = float(value)
        values[name] = value
    step = TraceStep(**values)
    try:
        step.validate()
    except TraceValidationError as exc:
        raise TraceValidationError(f"line {line_number}: {exc}") from exc
    return step


class _PendingTrace:
    def __init__(self, trace_id: str, horizon: int, seed: Optional[int], line_number: int) -> None:
        self.trace_id = trace_id
        self.horizon = horizon
        self.seed = seed
        self.line_number = line_number
        self.steps: List[TraceStep] = []

    def finish(self) -> Trace:
        if len(self.steps) != self.horizon:
            raise TraceParseError(
                f"trace '{self.trace_id}' declares T={self.horizon} but has {len(self.steps)} steps",
                self.line_number,
                field="T",
            )
        return Trace(trace_id=self.trace_id, steps=tuple(self.steps), seed=self.seed)


def load_traces(path: str | Path) -> List[Trace]:
    """Read every trace stored in ``path``."""

    file_path = Path(path)
    if not file_path.exists():
        raise MissingTracesError([str(file_path)])

    traces: List[Trace] = []
    pending: Optional[_PendingTrace] = None
    with file_path.open("rb") as fp:
        for line_number, raw in enumerate(fp, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise TraceParseError(f"not valid UTF-8 ({exc.reason})", line_number) from exc
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(f"invalid JSON ({exc.msg})", line_number) from exc
            if not isinstance(record, dict):
                raise TraceParseError("record must be a JSON object", line_number)

            kind = _field(record, "type", line_number)
            if kind == "trace":
                if pending is not None:
                    traces.append(pending.finish())
                seed = None if record.get("seed") is None else _int_field(record, "seed", line_number)
                pending = _PendingTrace(
                    trace_id=str(_field(record, "id", line_number)),
                    horizon=_int_field(record, "T", line_number, minimum=1),
                    seed=seed,
                    line_number=line_number,
                )
            elif kind == "step":
                if pending is None:
                    raise TraceParseError("step record before any trace header", line_number)
                t = _field(record, "t", line_number)
                if t != len(pending.steps):
                    raise TraceParseError(
                        f"expected step t={len(pending.steps)}, got t={t}", line_number, field="t"
                    )
                pending.steps.append(_parse_step(record, line_number))
            else:
                raise TraceParseError(f"unknown record type {kind!r}", line_number, field="type")

    if pending is not None:
        traces.append(pending.finish())
    logger.debug("Loaded %d traces from %s", len(traces), file_path)
    return traces


class FileTraceSource(TraceSource):
    """Traces read from a line-delimited JSON file."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def get_traces(self) -> List[Trace]:
        return load_traces(self.path)

    def describe(self) -> str:
        return f"file {self.path}"
