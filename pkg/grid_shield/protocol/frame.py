"""Signed frames.

Layout (little-endian)::

    magic "SGSL" | version u8 | msg_type u8 | session_id [16] | counter u64
    | payload_len u32 | payload | sig_len u16 | signature

The signature covers SHA-256 of everything before ``sig_len``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

from grid_shield.crypto.curve import P256, CurveParams, Point
from grid_shield.crypto.schnorr import sign, verify
from grid_shield.errors import FrameParseError

MAGIC = b"SGSL"
VERSION = 1
SESSION_ID_LEN = 16
HEADER = struct.Struct("<4sBB16sQI")
SIG_LEN = struct.Struct("<H")
MAX_PAYLOAD = 256 * 1024 * 1024


class MsgType(IntEnum):
    CS1 = 0x01
    SC1 = 0x02
    CS2 = 0x03
    SC2 = 0x04
    ABORT = 0x05


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    session_id: bytes
    counter: int
    payload: bytes
    signature: bytes = b""

    def __post_init__(self) -> None:
        if len(self.session_id) != SESSION_ID_LEN:
            raise FrameParseError(f"session id must be {SESSION_ID_LEN} bytes")
        if not 0 <= self.counter < 2 ** 64:
            raise FrameParseError("counter out of range")
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameParseError("payload too large")

    def header(self) -> bytes:
        return HEADER.pack(
            MAGIC, VERSION, int(self.msg_type), self.session_id, self.counter, len(self.payload)
        )

    def digest(self) -> bytes:
        return hashlib.sha256(self.header() + self.payload).digest()

    def signed(self, sk: int, curve: CurveParams = P256) -> "Frame":
        return replace(self, signature=sign(sk, self.digest(), curve))

    def verify(self, pk: Point, curve: CurveParams = P256) -> bool:
        return verify(pk, self.digest(), self.signature, curve)

    def encode(self) -> bytes:
        return b"".join(
            [self.header(), self.payload, SIG_LEN.pack(len(self.signature)), self.signature]
        )

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        """Parse one complete frame; anything malformed is a FrameParseError."""
        data = bytes(data)
        if len(data) < HEADER.size + SIG_LEN.size:
            raise FrameParseError(f"frame too short ({len(data)} bytes)")
        magic, version, msg_type, session_id, counter, payload_len = HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FrameParseError("bad magic")
        if version != VERSION:
            raise FrameParseError(f"unsupported version {version}")
        try:
            kind = MsgType(msg_type)
        except ValueError as e:
            raise FrameParseError(f"unknown message type 0x{msg_type:02x}", cause=e) from e

        offset = HEADER.size
        if payload_len > len(data) - offset - SIG_LEN.size:
            raise FrameParseError("payload length exceeds frame")
        payload = data[offset:offset + payload_len]
        offset += payload_len
        (sig_len,) = SIG_LEN.unpack_from(data, offset)
        offset += SIG_LEN.size
        if offset + sig_len != len(data):
            raise FrameParseError("signature length does not match frame size")
        return cls(
            msg_type=kind,
            session_id=session_id,
            counter=counter,
            payload=payload,
            signature=data[offset:],
        )


def session_id_of(data: bytes) -> Optional[bytes]:
    """Session id from the header alone, or None if the bytes are not a frame."""
    if len(data) < HEADER.size:
        return None
    magic, _, _, session_id, _, _ = HEADER.unpack_from(data, 0)
    return session_id if magic == MAGIC else None
