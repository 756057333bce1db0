"""Benchmark baselines: Simon64/128, Speck64/128 and AES-128.

Simon and Speck follow their designers' description (32-bit words, key
given most-significant word first as in the published vectors) and run
vectorised over numpy uint32 arrays so a CTR keystream is one pass over
all blocks.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from grid_shield.errors import ContractError

MASK32 = 0xFFFFFFFF

# Simon constant sequence z3 (the one used for 64/128).
Z3 = "11011011101011000110010111100000010010001010011100110100001111"


def _ror(x: int, r: int) -> int:
    return ((x >> r) | (x << (32 - r))) & MASK32


def _rol(x: int, r: int) -> int:
    return ((x << r) | (x >> (32 - r))) & MASK32


def _vror(x: np.ndarray, r: int) -> np.ndarray:
    return (x >> np.uint32(r)) | (x << np.uint32(32 - r))


def _vrol(x: np.ndarray, r: int) -> np.ndarray:
    return (x << np.uint32(r)) | (x >> np.uint32(32 - r))


def _key_words(key: Sequence[int]) -> list[int]:
    words = [int(w) for w in key]
    if len(words) != 4 or any(not 0 <= w <= MASK32 for w in words):
        raise ContractError("a 128-bit key is four 32-bit words")
    return words


class _WordCipher:
    """Shared CTR plumbing for the 64-bit block ciphers."""

    name = ""

    def encrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def decrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def encrypt_block(self, x: int, y: int) -> tuple[int, int]:
        cx, cy = self.encrypt(np.array([x], dtype=np.uint32), np.array([y], dtype=np.uint32))
        return int(cx[0]), int(cy[0])

    def decrypt_block(self, x: int, y: int) -> tuple[int, int]:
        px, py = self.decrypt(np.array([x], dtype=np.uint32), np.array([y], dtype=np.uint32))
        return int(px[0]), int(py[0])

    def ctr(self, data: bytes, nonce: int) -> bytes:
        """XOR ``data`` with E(nonce, block index); the same call decrypts."""
        n_blocks = -(-len(data) // 8)
        x = np.full(n_blocks, nonce & MASK32, dtype=np.uint32)
        y = np.arange(n_blocks, dtype=np.uint32)
        cx, cy = self.encrypt(x, y)
        stream = np.empty((n_blocks, 2), dtype="<u4")
        stream[:, 0] = cx
        stream[:, 1] = cy
        keystream = stream.view(np.uint8).reshape(-1)[:len(data)]
        return (np.frombuffer(data, dtype=np.uint8) ^ keystream).tobytes()


class Simon64(_WordCipher):
    """Simon64/128: 44 rounds, constant sequence z3."""

    name = "Simon64/128"
    ROUNDS = 44

    def __init__(self, key: Sequence[int]):
        k3, k2, k1, k0 = _key_words(key)
        k = [k0, k1, k2, k3]
        for i in range(4, self.ROUNDS):
            tmp = _ror(k[i - 1], 3) ^ k[i - 3]
            tmp ^= _ror(tmp, 1)
            k.append((~k[i - 4] & MASK32) ^ tmp ^ int(Z3[(i - 4) % 62]) ^ 3)
        self._round_keys = [np.uint32(v) for v in k]

    @staticmethod
    def _f(x: np.ndarray) -> np.ndarray:
        return (_vrol(x, 1) & _vrol(x, 8)) ^ _vrol(x, 2)

    def encrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, y = x.astype(np.uint32), y.astype(np.uint32)
        for rk in self._round_keys:
            x, y = y ^ self._f(x) ^ rk, x
        return x, y

    def decrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, y = x.astype(np.uint32), y.astype(np.uint32)
        for rk in reversed(self._round_keys):
            x, y = y, x ^ self._f(y) ^ rk
        return x, y


class Speck64(_WordCipher):
    """Speck64/128: 27 rounds, rotations 8 and 3."""

    name = "Speck64/128"
    ROUNDS = 27
    ALPHA = 8
    BETA = 3

    def __init__(self, key: Sequence[int]):
        l2, l1, l0, k0 = _key_words(key)
        ks = [k0]
        ls = [l0, l1, l2]
        for i in range(self.ROUNDS - 1):
            ls.append(((ks[i] + _ror(ls[i], self.ALPHA)) & MASK32) ^ i)
            ks.append(_rol(ks[i], self.BETA) ^ ls[i + 3])
        self._round_keys = [np.uint32(v) for v in ks]

    def encrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, y = x.astype(np.uint32), y.astype(np.uint32)
        for rk in self._round_keys:
            x = (_vror(x, self.ALPHA) + y) ^ rk
            y = _vrol(y, self.BETA) ^ x
        return x, y

    def decrypt(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, y = x.astype(np.uint32), y.astype(np.uint32)
        for rk in reversed(self._round_keys):
            y = _vror(y ^ x, self.BETA)
            x = _vrol((x ^ rk) - y, self.ALPHA)
        return x, y


def key_words_from_bytes(key: bytes) -> tuple[int, int, int, int]:
    if len(key) != 16:
        raise ContractError("key must be 16 bytes")
    return tuple(int.from_bytes(key[i:i + 4], "big") for i in range(0, 16, 4))  # type: ignore[return-value]


def aes_ecb_block(key: bytes, block: bytes) -> bytes:
    """Single AES block, for the FIPS-197 known-answer check."""
    encryptor = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return encryptor.update(block) + encryptor.finalize()


def aes_ctr(key: bytes, nonce: bytes, data: bytes) -> bytes:
    encryptor = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return encryptor.update(data) + encryptor.finalize()
