"""Counter-based mask stream and additive masking of IntBlob words.

The pad for a message is the AES-256-CTR keystream under a per-session
stream key, starting from the 16-byte block nonce

    counter (u64 BE) | direction (u8) | 0x000000 | block index (u32 BE)

so every (counter, direction, block) triple gets its own 16-byte pad block.
Masking adds pad words modulo 2^32; demasking subtracts them.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from enum import IntEnum

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from grid_shield.crypto.codec import IntBlob
from grid_shield.errors import ContractError

WORDS_PER_BLOCK = 4
MAX_BLOCKS = 2 ** 32
STREAM_LABEL = b"sgsl stream"


class Direction(IntEnum):
    CLIENT_TO_SERVER = 0
    SERVER_TO_CLIENT = 1


def block_nonce(counter: int, direction: int, block: int = 0) -> bytes:
    if not 0 <= counter < 2 ** 64:
        raise ContractError("counter must fit in 64 bits")
    if not 0 <= block < MAX_BLOCKS:
        raise ContractError("block index must fit in 32 bits")
    return struct.pack(">QB3xI", counter, int(Direction(direction)), block)


class MaskStream:
    """Deterministic word stream keyed by (k_Mask, session_id).

    ``enabled=False`` gives the all-zero stream, so masked == plain.
    """

    def __init__(self, k_mask: bytes, session_id: bytes, enabled: bool = True):
        if len(k_mask) != 32:
            raise ContractError("k_Mask must be 32 bytes")
        self.session_id = bytes(session_id)
        self.enabled = enabled
        self._key = hmac.new(bytes(k_mask), STREAM_LABEL + self.session_id, hashlib.sha256).digest()

    def pad(self, counter: int, direction: int, n_words: int) -> np.ndarray:
        """First ``n_words`` uint32 pad words for one message."""
        if n_words < 0:
            raise ContractError("n_words must be non-negative")
        n_blocks = -(-n_words // WORDS_PER_BLOCK)
        if n_blocks > MAX_BLOCKS:
            raise ContractError("message too long for one mask stream")
        nonce = block_nonce(counter, direction, 0)
        if not self.enabled:
            return np.zeros(n_words, dtype=np.uint32)
        encryptor = Cipher(algorithms.AES(self._key), modes.CTR(nonce)).encryptor()
        keystream = encryptor.update(bytes(n_blocks * 16)) + encryptor.finalize()
        return np.frombuffer(keystream, dtype="<u4")[:n_words].astype(np.uint32)

    def wipe(self) -> None:
        self._key = bytes(len(self._key))


def mask(blob: IntBlob, stream: MaskStream, counter: int, direction: int) -> IntBlob:
    if blob.masked:
        raise ContractError("blob is already masked")
    pad = stream.pad(counter, direction, len(blob))
    return IntBlob(
        shape=blob.shape,
        frac_bits=blob.frac_bits,
        words=blob.words + pad,
        saturated=blob.saturated,
        masked=True,
    )


def demask(blob: IntBlob, stream: MaskStream, counter: int, direction: int) -> IntBlob:
    pad = stream.pad(counter, direction, len(blob))
    return IntBlob(
        shape=blob.shape,
        frac_bits=blob.frac_bits,
        words=blob.words - pad,
        saturated=blob.saturated,
        masked=False,
    )
