"""Payload codecs for the five message types.

    CS1 / SC1  id_len u8 | party id (utf-8) | compressed point | flags u8
    CS2        purpose u8 | m1_len u32 | m1 | m2_len u32 | m2
    SC2        m3_len u32 | m3 | m4_len u32 | m4
    ABORT      code u8 | reason (utf-8)

m1 and m3 are word tensors (rank u8 | dims u32[rank] | frac_bits u8 |
words u32[]); m2 and m4 are ciphertexts of float tensors (rank u8 |
dims u32[rank] | float32[]). All integers little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum, IntFlag

import numpy as np

from grid_shield.crypto.codec import MAX_FRAC_BITS, IntBlob
from grid_shield.errors import ContractError, FrameParseError

MAX_RANK = 8
_U32 = struct.Struct("<I")


class Flags(IntFlag):
    NONE = 0
    MASKING = 0x01
    ENCRYPT_TARGET = 0x02


class Purpose(IntEnum):
    TRAIN = 0
    INFER = 1


class AbortCode(IntEnum):
    BAD_FRAME = 1
    BAD_SIGNATURE = 2
    BAD_POINT = 3
    UNKNOWN_PARTY = 4
    STATE = 5
    REPLAY = 6
    POLICY = 7
    DIVERGED = 8
    INTERNAL = 9


@dataclass(frozen=True)
class Hello:
    party_id: str
    point: bytes
    flags: Flags


@dataclass(frozen=True)
class Intermediate:
    purpose: Purpose
    m1: bytes
    m2: bytes


@dataclass(frozen=True)
class Reply:
    m3: bytes
    m4: bytes


@dataclass(frozen=True)
class Abort:
    code: int
    reason: str


class _Reader:
    """Bounds-checked cursor; every short read is a FrameParseError."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.offset + n > len(self.data):
            raise FrameParseError("payload truncated")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def sized(self) -> bytes:
        return self.take(self.u32())

    def rest(self) -> bytes:
        return self.take(len(self.data) - self.offset)

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise FrameParseError("trailing bytes in payload")


def _sized(chunk: bytes) -> bytes:
    return _U32.pack(len(chunk)) + chunk


def encode_hello(hello: Hello) -> bytes:
    ident = hello.party_id.encode("utf-8")
    if not 0 < len(ident) <= 255:
        raise ContractError("party id must be 1..255 bytes")
    return bytes([len(ident)]) + ident + hello.point + bytes([int(hello.flags)])


def decode_hello(payload: bytes, point_len: int) -> Hello:
    reader = _Reader(payload)
    ident = reader.take(reader.u8())
    point = reader.take(point_len)
    flags = reader.u8()
    reader.finish()
    try:
        party_id = ident.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FrameParseError("party id is not utf-8", cause=e) from e
    if not party_id:
        raise FrameParseError("empty party id")
    if flags & ~int(Flags.MASKING | Flags.ENCRYPT_TARGET):
        raise FrameParseError(f"unknown flag bits 0x{flags:02x}")
    return Hello(party_id=party_id, point=point, flags=Flags(flags))


def encode_intermediate(msg: Intermediate) -> bytes:
    return bytes([int(msg.purpose)]) + _sized(msg.m1) + _sized(msg.m2)


def decode_intermediate(payload: bytes) -> Intermediate:
    reader = _Reader(payload)
    purpose = reader.u8()
    m1 = reader.sized()
    m2 = reader.sized()
    reader.finish()
    try:
        kind = Purpose(purpose)
    except ValueError as e:
        raise FrameParseError(f"unknown purpose {purpose}", cause=e) from e
    return Intermediate(purpose=kind, m1=m1, m2=m2)


def encode_reply(msg: Reply) -> bytes:
    return _sized(msg.m3) + _sized(msg.m4)


def decode_reply(payload: bytes) -> Reply:
    reader = _Reader(payload)
    m3 = reader.sized()
    m4 = reader.sized()
    reader.finish()
    return Reply(m3=m3, m4=m4)


def encode_abort(msg: Abort) -> bytes:
    return bytes([int(msg.code) & 0xFF]) + msg.reason.encode("utf-8")


def decode_abort(payload: bytes) -> Abort:
    reader = _Reader(payload)
    code = reader.u8()
    reason = reader.rest().decode("utf-8", errors="replace")
    return Abort(code=code, reason=reason)


def _encode_shape(shape: tuple[int, ...]) -> bytes:
    if len(shape) > MAX_RANK:
        raise ContractError(f"rank {len(shape)} exceeds {MAX_RANK}")
    return bytes([len(shape)]) + struct.pack(f"<{len(shape)}I", *shape)


def _decode_shape(reader: _Reader) -> tuple[int, ...]:
    rank = reader.u8()
    if rank > MAX_RANK:
        raise FrameParseError(f"rank {rank} exceeds {MAX_RANK}")
    return struct.unpack(f"<{rank}I", reader.take(4 * rank))


def _element_count(shape: tuple[int, ...], available: int, width: int) -> int:
    count = 1
    for dim in shape:
        count *= dim
        if count * width > available:
            raise FrameParseError("tensor dims exceed payload")
    return count


def encode_blob(blob: IntBlob) -> bytes:
    return (
        _encode_shape(blob.shape)
        + bytes([blob.frac_bits])
        + blob.words.astype("<u4").tobytes()
    )


def decode_blob(data: bytes, masked: bool) -> IntBlob:
    reader = _Reader(data)
    shape = _decode_shape(reader)
    frac_bits = reader.u8()
    if frac_bits > MAX_FRAC_BITS:
        raise FrameParseError(f"frac_bits {frac_bits} out of range")
    count = _element_count(shape, len(data) - reader.offset, 4)
    words = np.frombuffer(reader.take(4 * count), dtype="<u4").astype(np.uint32)
    reader.finish()
    return IntBlob(shape=shape, frac_bits=frac_bits, words=words, masked=masked)


def encode_array(values: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(values, dtype="<f4")
    return _encode_shape(arr.shape) + arr.tobytes()


def decode_array(data: bytes) -> np.ndarray:
    reader = _Reader(data)
    shape = _decode_shape(reader)
    count = _element_count(shape, len(data) - reader.offset, 4)
    values = np.frombuffer(reader.take(4 * count), dtype="<f4").astype(np.float32)
    reader.finish()
    return values.reshape(shape)
