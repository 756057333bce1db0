"""Deterministic Schnorr signatures over a CurveParams group.

    k = HMAC-SHA256(sk, digest) mod n          (re-keyed with a counter while k == 0)
    R = kG,  e = H(enc(R) | enc(P) | digest) mod n,  s = k + e * sk mod n
    signature = enc(R) | s

Verification accepts iff sG == R + eP.
"""

from __future__ import annotations

import hashlib
import hmac

from grid_shield.crypto.curve import P256, CurveParams, Point
from grid_shield.errors import ContractError, CryptoError


def _nonce(sk: int, digest: bytes, curve: CurveParams) -> int:
    key = sk.to_bytes(curve.scalar_len, "big")
    counter = 0
    while True:
        msg = digest if counter == 0 else digest + counter.to_bytes(4, "big")
        k = int.from_bytes(hmac.new(key, msg, hashlib.sha256).digest(), "big") % curve.n
        if k:
            return k
        counter += 1


def _challenge(r_enc: bytes, p_enc: bytes, digest: bytes, curve: CurveParams) -> int:
    return int.from_bytes(hashlib.sha256(r_enc + p_enc + digest).digest(), "big") % curve.n


def signature_len(curve: CurveParams = P256) -> int:
    return curve.point_len + curve.scalar_len


def sign(sk: int, digest: bytes, curve: CurveParams = P256) -> bytes:
    if not 1 <= sk < curve.n:
        raise ContractError("secret scalar must be in [1, n - 1]")
    if len(digest) != 32:
        raise ContractError("digest must be 32 bytes")
    pk = curve.mul_base(sk)
    k = _nonce(sk, digest, curve)
    r = curve.mul_base(k)
    r_enc = curve.encode_point(r)
    e = _challenge(r_enc, curve.encode_point(pk), digest, curve)
    s = (k + e * sk) % curve.n
    return r_enc + s.to_bytes(curve.scalar_len, "big")


def verify(pk: Point, digest: bytes, signature: bytes, curve: CurveParams = P256) -> bool:
    """True iff ``signature`` is valid; malformed input is just False."""
    if len(digest) != 32 or len(signature) != signature_len(curve):
        return False
    try:
        p_enc = curve.encode_point(pk)
        r_enc = signature[:curve.point_len]
        r = curve.decode_point(r_enc)
    except CryptoError:
        return False
    s = int.from_bytes(signature[curve.point_len:], "big")
    if s >= curve.n:
        return False
    e = _challenge(r_enc, p_enc, digest, curve)
    return curve.mul_base(s) == curve.add(r, curve.mul(e, pk))
