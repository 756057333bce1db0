"""Data package - meter series, ingestion, synthesis, theft injection and windows."""

from grid_shield.data.series import MeterSeries, TheftEpisode
from grid_shield.data.ingest import IngestSchema, ingest_csv, read_sidecar, write_csv
from grid_shield.data.synth import synth
from grid_shield.data.theft import inject_theft
from grid_shield.data.stats import (
    CorrelationMatrix,
    NormStats,
    correlation_matrix,
    describe,
    split_series,
)
from grid_shield.data.windows import Batch, WindowSet, window_count, windowize

__all__ = [
    "MeterSeries",
    "TheftEpisode",
    "IngestSchema",
    "ingest_csv",
    "write_csv",
    "read_sidecar",
    "synth",
    "inject_theft",
    "CorrelationMatrix",
    "correlation_matrix",
    "describe",
    "NormStats",
    "split_series",
    "Batch",
    "WindowSet",
    "window_count",
    "windowize",
]
