"""Wall-clock comparison of masking against the block-cipher baselines."""

from __future__ import annotations

import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
import pandas as pd

from grid_shield.crypto.ciphers import Simon64, Speck64, aes_ctr, key_words_from_bytes
from grid_shield.crypto.codec import IntBlob
from grid_shield.crypto.mask import Direction, MaskStream
from grid_shield.errors import ContractError

logger = logging.getLogger(__name__)

MIN_PAYLOAD = 1024
DEFAULT_RUNS = 9

MASK_ONLINE = "mask+demask (online)"
MASK_PAD = "mask pad derivation"
AES_CTR = "AES-128-CTR"
FHE = "FHE"


@dataclass
class BenchRow:
    name: str
    median_s: Optional[float]
    note: str = ""

    def throughput_mib_s(self, payload_bytes: int) -> Optional[float]:
        if not self.median_s:
            return None
        return payload_bytes / (1024 * 1024) / self.median_s


@dataclass
class BenchTable:
    payload_bytes: int
    runs: int
    rows: list[BenchRow] = field(default_factory=list)

    def row(self, name: str) -> BenchRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def mask_beats_aes(self) -> bool:
        mask_s = self.row(MASK_ONLINE).median_s
        aes_s = self.row(AES_CTR).median_s
        return mask_s is not None and aes_s is not None and mask_s <= aes_s

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "name": r.name,
                    "median_s": r.median_s,
                    "mib_per_s": r.throughput_mib_s(self.payload_bytes),
                    "note": r.note,
                }
                for r in self.rows
            ]
        )

    def format(self) -> str:
        lines = [f"payload {self.payload_bytes} bytes, median of {self.runs} runs (encrypt+decrypt)"]
        for r in self.rows:
            if r.median_s is None:
                lines.append(f"  {r.name:<24} {'-':>12}  {r.note}")
            else:
                mib = r.throughput_mib_s(self.payload_bytes)
                lines.append(f"  {r.name:<24} {r.median_s * 1e3:>9.3f} ms  {mib:>9.1f} MiB/s  {r.note}".rstrip())
        return "\n".join(lines)


@contextmanager
def _pinned() -> Iterator[None]:
    """Run on a single CPU while timing, where the platform allows it."""
    if not hasattr(os, "sched_getaffinity"):
        yield
        return
    previous = os.sched_getaffinity(0)
    try:
        os.sched_setaffinity(0, {min(previous)})
    except OSError:
        yield
        return
    try:
        yield
    finally:
        os.sched_setaffinity(0, previous)


def _median_time(fn: Callable[[], object], runs: int) -> float:
    samples = []
    for _ in range(runs):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def bench_ciphers(payload_bytes: int, runs: int = DEFAULT_RUNS, seed: int = 0) -> BenchTable:
    """Median timings of every scheme over the same random payload."""
    if payload_bytes < MIN_PAYLOAD:
        raise ContractError(f"payload must be at least {MIN_PAYLOAD} bytes")
    payload_bytes -= payload_bytes % 8
    rng = np.random.default_rng(seed)
    payload = rng.integers(0, 256, payload_bytes, dtype=np.uint8).tobytes()
    key = rng.integers(0, 256, 32, dtype=np.uint8).tobytes()

    words = np.frombuffer(payload, dtype=np.uint32)
    blob = IntBlob(shape=(words.size,), frac_bits=16, words=words)
    stream = MaskStream(key, b"\x00" * 16)
    pad = stream.pad(1, Direction.CLIENT_TO_SERVER, blob.words.size)

    def mask_online() -> None:
        masked = blob.words + pad
        restored = masked - pad
        assert restored[0] == blob.words[0]

    def mask_pad() -> None:
        stream.pad(1, Direction.CLIENT_TO_SERVER, blob.words.size)

    nonce = bytes(16)

    def aes() -> None:
        aes_ctr(key[:16], nonce, aes_ctr(key[:16], nonce, payload))

    key_words = key_words_from_bytes(key[:16])
    simon = Simon64(key_words)
    speck = Speck64(key_words)

    table = BenchTable(payload_bytes=payload_bytes, runs=runs)
    with _pinned():
        table.rows.append(BenchRow(MASK_ONLINE, _median_time(mask_online, runs), "pad derived ahead of the message"))
        table.rows.append(BenchRow(MASK_PAD, _median_time(mask_pad, runs), "AES-256-CTR keystream, one side"))
        table.rows.append(BenchRow(AES_CTR, _median_time(aes, runs)))
        table.rows.append(BenchRow(simon.name + "-CTR", _median_time(lambda: simon.ctr(simon.ctr(payload, 7), 7), runs)))
        table.rows.append(BenchRow(speck.name + "-CTR", _median_time(lambda: speck.ctr(speck.ctr(payload, 7), 7), runs)))
    table.rows.append(BenchRow(FHE, None, "not measured"))

    logger.info("Benchmark over %d bytes:\n%s", payload_bytes, table.format())
    if not table.mask_beats_aes:
        logger.warning("Online masking was slower than AES-128-CTR on this host")
    return table
