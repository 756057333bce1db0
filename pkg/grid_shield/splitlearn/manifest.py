"""Run manifest and loss log files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Union

from grid_shield.errors import ConfigurationError
from grid_shield.model.trainer import LossRecord

LOSS_LOG_FIELDS = ["step", "l_rec", "l_adv"]


@dataclass
class RunManifest:
    """Plain-text ``key=value`` record of what a run used.

    Nested values (config sections) are stored as compact JSON on their line.
    """

    entries: dict[str, Any] = field(default_factory=dict)

    def __setitem__(self, key: str, value: Any) -> None:
        if "=" in key or "\n" in key:
            raise ConfigurationError(f"invalid manifest key {key!r}")
        self.entries[key] = value

    def __getitem__(self, key: str) -> Any:
        return self.entries[key]

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def get(self, key: str, default: Any = None) -> Any:
        return self.entries.get(key, default)

    def update(self, values: dict[str, Any]) -> None:
        for key, value in values.items():
            self[key] = value

    @classmethod
    def for_run(cls, seed: int, dataset_hash: str, **sections: Any) -> "RunManifest":
        manifest = cls({"created_at": datetime.now().isoformat(timespec="seconds")})
        manifest["seed"] = seed
        manifest["dataset_hash"] = dataset_hash
        manifest.update(sections)
        return manifest

    def save(self, filepath: Union[str, Path]) -> None:
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{key}={_render(value)}" for key, value in self.entries.items()]
        filepath.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, filepath: Union[str, Path]) -> "RunManifest":
        filepath = Path(filepath)
        if not filepath.exists():
            raise ConfigurationError(f"manifest not found: {filepath}")
        entries: dict[str, Any] = {}
        for number, line in enumerate(filepath.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ConfigurationError(f"{filepath}:{number}: expected key=value")
            entries[key.strip()] = _parse(raw)
        return cls(entries)


def _render(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, separators=(",", ":"), sort_keys=True)


def _parse(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def write_loss_log(records: Iterable[LossRecord], filepath: Union[str, Path]) -> int:
    """Write ``step,l_rec,l_adv`` rows; returns the number of steps written."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=LOSS_LOG_FIELDS)
        writer.writeheader()
        for step, record in enumerate(records):
            writer.writerow({"step": step, "l_rec": f"{record.l_rec:.8g}", "l_adv": f"{record.l_adv:.8g}"})
            count += 1
    return count


def read_loss_log(filepath: Union[str, Path]) -> list[LossRecord]:
    with open(filepath, "r", encoding="utf-8") as f:
        return [LossRecord(float(row["l_rec"]), float(row["l_adv"])) for row in csv.DictReader(f)]
