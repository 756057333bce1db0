"""GTCK checkpoint files.

Layout (little-endian): magic "GTCK", version u8, then one record per tensor
until end of file: name length u16, UTF-8 name, rank u8, dims u32[rank],
float32 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np

from grid_shield.errors import ConfigurationError
from grid_shield.model.params import ModelParams, ParamSet

MAGIC = b"GTCK"
VERSION = 1


def save_checkpoint(tensors: Mapping[str, np.ndarray], filepath: Union[str, Path]) -> None:
    """Write named tensors to a GTCK file."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    chunks = [MAGIC, struct.pack("<B", VERSION)]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f4")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    filepath.write_bytes(b"".join(chunks))


def load_checkpoint(filepath: Union[str, Path]) -> dict[str, np.ndarray]:
    """Read a GTCK file back into a name -> float32 array dict."""
    filepath = Path(filepath)
    if not filepath.exists():
        raise ConfigurationError(f"checkpoint not found: {filepath}")
    data = filepath.read_bytes()
    if len(data) < 5 or data[:4] != MAGIC:
        raise ConfigurationError(f"{filepath} is not a GTCK checkpoint")
    if data[4] != VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {data[4]}")

    tensors: dict[str, np.ndarray] = {}
    offset = 5
    try:
        while offset < len(data):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            end = offset + 4 * count
            if end > len(data):
                raise ConfigurationError(f"checkpoint truncated inside tensor {name!r}")
            tensors[name] = np.frombuffer(data[offset:end], dtype="<f4").reshape(dims).astype(np.float32)
            offset = end
    except (struct.error, UnicodeDecodeError) as e:
        raise ConfigurationError(f"corrupt checkpoint {filepath}", cause=e) from e
    return tensors


def prefixed_tensors(params: ParamSet, prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}.{name}": tensor.data for name, tensor in params.items()}


def load_prefixed(params: ParamSet, prefix: str, tensors: Mapping[str, np.ndarray]) -> None:
    """Load the tensors named ``<prefix>.*`` into ``params``."""
    state = {k[len(prefix) + 1:]: v for k, v in tensors.items() if k.startswith(prefix + ".")}
    params.load_state(state)


def party_tensors(params: ModelParams, parts: Iterable[str]) -> dict[str, np.ndarray]:
    """Prefixed tensors of the requested parts ("enc", "dec", "dis")."""
    out: dict[str, np.ndarray] = {}
    available = params.parts()
    for part in parts:
        out.update(prefixed_tensors(available[part], part))
    return out


def restore_parts(params: ModelParams, tensors: Mapping[str, np.ndarray], parts: Iterable[str]) -> None:
    available = params.parts()
    for part in parts:
        load_prefixed(available[part], part, tensors)
