"""Key pairs and Diffie-Hellman agreement over a CurveParams group."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from grid_shield.crypto.curve import P256, CurveParams, Entropy, Point
from grid_shield.errors import ContractError


@dataclass(frozen=True)
class KeyPair:
    sk: int = field(repr=False)
    pk: tuple[int, int]
    curve: CurveParams = P256

    @classmethod
    def generate(cls, curve: CurveParams = P256, entropy: Optional[Entropy] = None) -> "KeyPair":
        return cls.from_secret(curve.random_scalar(entropy), curve)

    @classmethod
    def from_secret(cls, sk: int, curve: CurveParams = P256) -> "KeyPair":
        if not 1 <= sk < curve.n:
            raise ContractError("secret scalar must be in [1, n - 1]")
        pk = curve.mul_base(sk)
        assert pk is not None
        return cls(sk=sk, pk=pk, curve=curve)

    def public_bytes(self) -> bytes:
        return self.curve.encode_point(self.pk)

    def secret_hex(self) -> str:
        return self.sk.to_bytes(self.curve.scalar_len, "big").hex()


def ecdh_shared(sk_self: int, pk_peer: Point, curve: CurveParams = P256) -> tuple[int, int]:
    """sk_self * pk_peer; the peer point is validated before use."""
    peer = curve.validate(pk_peer)
    if not 1 <= sk_self < curve.n:
        raise ContractError("secret scalar must be in [1, n - 1]")
    shared = curve.mul(sk_self, peer)
    # Prime-order group: a valid peer point never lands on the identity.
    assert shared is not None
    return shared
