"""HKDF-SHA256 over the ECDH shared point, and the per-session key pair."""

from __future__ import annotations

from dataclasses import dataclass, field

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from grid_shield.crypto.curve import P256, CurveParams, Point
from grid_shield.errors import ContractError, CryptoError

HASH_LEN = 32
MAX_LENGTH = 255 * HASH_LEN

ENC_LABEL = b"sgsl enc"
MASK_LABEL = b"sgsl mask"


def kdf(
    shared: Point,
    salt: bytes,
    context: bytes,
    length: int = 32,
    curve: CurveParams = P256,
) -> bytes:
    """Extract-then-expand over the x coordinate of ``shared``."""
    if not 1 <= length <= MAX_LENGTH:
        raise ContractError(f"kdf length must be in [1, {MAX_LENGTH}], got {length}")
    point = curve.validate(shared)
    ikm = point[0].to_bytes(curve.field_len, "big")
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=salt, info=context).derive(ikm)


@dataclass
class SessionKeys:
    """k_Enc and k_Mask, held in mutable buffers so they can be wiped."""

    k_enc: bytearray = field(repr=False)
    k_mask: bytearray = field(repr=False)

    def __post_init__(self) -> None:
        self.k_enc = bytearray(self.k_enc)
        self.k_mask = bytearray(self.k_mask)
        if self.k_enc == self.k_mask:
            raise CryptoError("encryption and mask keys must differ")

    @property
    def zeroized(self) -> bool:
        return not any(self.k_enc) and not any(self.k_mask)

    def zeroize(self) -> None:
        for buf in (self.k_enc, self.k_mask):
            buf[:] = bytes(len(buf))


def derive_session_keys(shared: Point, session_id: bytes, curve: CurveParams = P256) -> SessionKeys:
    return SessionKeys(
        k_enc=bytearray(kdf(shared, session_id, ENC_LABEL, HASH_LEN, curve)),
        k_mask=bytearray(kdf(shared, session_id, MASK_LABEL, HASH_LEN, curve)),
    )
