"""Trace providers: synthetic generation and file ingestion."""

from .base import TraceSource
from .io import FileTraceSource, load_traces, save_traces
from .synthetic import (
    SyntheticTraceSource,
    estimate_phi_scale,
    generate_dataset,
    generate_trace,
    random_trace,
)

__all__ = [
    "TraceSource",
    "FileTraceSource",
    "SyntheticTraceSource",
    "load_traces",
    "save_traces",
    "generate_trace",
    "generate_dataset",
    "random_trace",
    "estimate_phi_scale",
]
