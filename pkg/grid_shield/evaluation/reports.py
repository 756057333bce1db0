"""Report files under the reports directory."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from grid_shield.errors import ContractError

TRACE_FIELDS = ["index", "real", "recon_plain", "recon_masked"]


def write_trace_csv(
    filepath: Union[str, Path],
    real: np.ndarray,
    recon_plain: np.ndarray,
    recon_masked: np.ndarray,
) -> Path:
    """One row per fifteen-minute step of a held-out window."""
    real = np.asarray(real, dtype=np.float64).reshape(-1)
    recon_plain = np.asarray(recon_plain, dtype=np.float64).reshape(-1)
    recon_masked = np.asarray(recon_masked, dtype=np.float64).reshape(-1)
    if not real.size == recon_plain.size == recon_masked.size:
        raise ContractError("trace columns must have the same length")

    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for i, (a, b, c) in enumerate(zip(real, recon_plain, recon_masked)):
            writer.writerow({"index": i, "real": f"{a:.6f}", "recon_plain": f"{b:.6f}", "recon_masked": f"{c:.6f}"})
    return filepath


def write_table(frame: pd.DataFrame, summary: str, reports_dir: Union[str, Path], name: str) -> tuple[Path, Path]:
    """``<name>.csv`` plus a human-readable ``<name>.txt``."""
    reports_dir = Path(reports_dir)
    reports_dir.mkdir(parents=True, exist_ok=True)
    csv_path = reports_dir / f"{name}.csv"
    txt_path = reports_dir / f"{name}.txt"
    frame.to_csv(csv_path, index=False, lineterminator="\n")
    txt_path.write_text(summary.rstrip("\n") + "\n", encoding="utf-8")
    return csv_path, txt_path
