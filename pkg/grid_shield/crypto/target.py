"""AES-128-CTR encryption of the target window (and the returned loss record).

Integrity comes from the frame signature; the nonce is the message's
(counter, direction) pair inside a session-unique key.
"""

from __future__ import annotations

import struct

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from grid_shield.crypto.mask import Direction
from grid_shield.errors import ContractError


def target_nonce(counter: int, direction: int) -> bytes:
    if not 0 <= counter < 2 ** 64:
        raise ContractError("counter must fit in 64 bits")
    return struct.pack(">QB7x", counter, int(Direction(direction)))


def _cipher(k_enc: bytes, nonce: bytes) -> Cipher:
    if len(k_enc) < 16:
        raise ContractError("k_Enc must hold at least 16 bytes")
    if len(nonce) != 16:
        raise ContractError("nonce must be 16 bytes")
    return Cipher(algorithms.AES(bytes(k_enc[:16])), modes.CTR(nonce))


def encrypt_target(k_enc: bytes, nonce: bytes, plaintext: bytes) -> bytes:
    encryptor = _cipher(k_enc, nonce).encryptor()
    return encryptor.update(plaintext) + encryptor.finalize()


def decrypt_target(k_enc: bytes, nonce: bytes, ciphertext: bytes) -> bytes:
    decryptor = _cipher(k_enc, nonce).decryptor()
    return decryptor.update(ciphertext) + decryptor.finalize()
