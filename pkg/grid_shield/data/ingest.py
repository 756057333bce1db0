"""CSV ingestion and export of meter series.

Input files follow the circuit-level export layout: a header row with a
``localminute`` timestamp column, the ``grid`` total and one column per
appliance circuit. Theft metadata lives in a plain-text sidecar next to the
CSV (``<name>.csv.theft``), one ``alpha=.. start=.. duration=..`` line per
episode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd

from grid_shield.data.series import STEP, MeterSeries, TheftEpisode
from grid_shield.errors import DataError

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".theft"
FLOAT_FORMAT = "%.6f"
TIME_FORMAT = "%Y-%m-%dT%H:%M:%S"


@dataclass
class IngestSchema:
    """Column mapping and gap policy for ``ingest_csv``."""

    timestamp_col: str = "localminute"
    grid_col: str = "grid"
    channels: Optional[list[str]] = None  # None: every other numeric column
    gaps: Literal["reject", "fill"] = "reject"

    def __post_init__(self) -> None:
        if self.gaps not in ("reject", "fill"):
            raise DataError(f"unknown gap policy {self.gaps!r}")


def _file_row(position: int) -> int:
    """Data row position -> 1-based line number in the file (header is line 1)."""
    return position + 2


def ingest_csv(filepath: Union[str, Path], schema: Optional[IngestSchema] = None) -> MeterSeries:
    """Parse, time-sort and gap-check a meter CSV."""
    schema = schema or IngestSchema()
    filepath = Path(filepath)
    if not filepath.exists():
        raise DataError(f"File not found: {filepath}")

    try:
        raw = pd.read_csv(filepath, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{filepath} is empty", cause=e) from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {filepath}", cause=e) from e

    if raw.empty:
        raise DataError(f"{filepath} has a header but no rows")
    for required in (schema.timestamp_col, schema.grid_col):
        if required not in raw.columns:
            raise DataError(f"missing column {required!r} in {filepath}")

    channel_names = schema.channels or [
        c for c in raw.columns if c not in (schema.timestamp_col, schema.grid_col)
    ]
    for name in channel_names:
        if name not in raw.columns:
            raise DataError(f"missing channel column {name!r} in {filepath}")

    times = pd.to_datetime(raw[schema.timestamp_col], utc=True, errors="coerce")
    bad = np.flatnonzero(times.isna().to_numpy())
    if bad.size:
        row = _file_row(int(bad[0]))
        raise DataError(
            f"unparseable timestamp {raw[schema.timestamp_col].iloc[bad[0]]!r}", row=row
        )

    numeric_cols = channel_names + [schema.grid_col]
    values = raw[numeric_cols].apply(pd.to_numeric, errors="coerce")
    finite = np.isfinite(values.to_numpy(dtype=np.float64))
    if not finite.all():
        position = int(np.flatnonzero(~finite.all(axis=1))[0])
        raise DataError("unparseable or missing numeric value", row=_file_row(position))

    frame = values.copy()
    frame.index = pd.DatetimeIndex(times.dt.tz_convert(None))
    duplicated = frame.index.duplicated()
    if duplicated.any():
        position = int(np.flatnonzero(duplicated)[0])
        raise DataError(f"duplicate timestamp {frame.index[position]}", row=_file_row(position))

    frame = frame.sort_index()
    frame = _check_gaps(frame, schema.gaps)

    grid = frame[schema.grid_col].to_numpy(dtype=np.float64)
    if (grid < 0).any():
        logger.warning("%s: %d negative grid readings (net export)", filepath, int((grid < 0).sum()))

    series = MeterSeries(
        timestamps=frame.index.to_numpy(dtype="datetime64[ns]"),
        channel_names=list(channel_names),
        channels=frame[channel_names].to_numpy(dtype=np.float64),
        grid=grid,
    )
    sidecar = sidecar_path(filepath)
    if sidecar.exists():
        _apply_episodes(series, read_sidecar(sidecar))
    logger.info("Ingested %d steps x %d channels from %s", len(series), len(channel_names), filepath)
    return series


def _check_gaps(frame: pd.DataFrame, policy: str) -> pd.DataFrame:
    if len(frame) < 2:
        return frame
    offsets = (frame.index - frame.index[0]).to_numpy(dtype="timedelta64[ns]")
    if np.any(offsets % STEP != np.timedelta64(0, "ns")):
        raise DataError("timestamps are not aligned to a 15-minute grid")
    full = pd.date_range(frame.index[0], frame.index[-1], freq="15min")
    missing = len(full) - len(frame)
    if missing == 0:
        return frame
    if policy == "reject":
        first_gap = int(np.flatnonzero(np.diff(frame.index.to_numpy()) != STEP)[0])
        raise DataError(f"{missing} missing timestamps after {frame.index[first_gap]}")
    logger.warning("Filling %d missing timestamps by carrying the last reading forward", missing)
    return frame.reindex(full).ffill()


def _apply_episodes(series: MeterSeries, episodes: list[TheftEpisode]) -> None:
    assert series.labels is not None
    for ep in episodes:
        if ep.start < 0 or ep.stop > len(series):
            raise DataError(f"sidecar episode {ep} lies outside the series")
        series.labels[ep.start:ep.stop] = True
    series.episodes = list(episodes)


def write_csv(series: MeterSeries, filepath: Union[str, Path]) -> None:
    """Write the series (and its theft sidecar, if any) to disk."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        series.to_frame().to_csv(
            f,
            index=False,
            float_format=FLOAT_FORMAT,
            date_format=TIME_FORMAT,
            lineterminator="\n",
        )
    sidecar = sidecar_path(filepath)
    if series.episodes:
        write_sidecar(series.episodes, sidecar)
    elif sidecar.exists():
        sidecar.unlink()


def sidecar_path(filepath: Union[str, Path]) -> Path:
    filepath = Path(filepath)
    return filepath.with_name(filepath.name + SIDECAR_SUFFIX)


def write_sidecar(episodes: list[TheftEpisode], filepath: Union[str, Path]) -> None:
    lines = [
        f"alpha={ep.alpha!r} start={ep.start} duration={ep.duration}" for ep in episodes
    ]
    Path(filepath).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sidecar(filepath: Union[str, Path]) -> list[TheftEpisode]:
    episodes = []
    text = Path(filepath).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            fields = dict(part.split("=", 1) for part in line.split())
            episodes.append(TheftEpisode.from_dict(fields))
        except (KeyError, ValueError) as e:
            raise DataError(f"bad theft sidecar line {line!r}", row=lineno, cause=e) from e
    return episodes
