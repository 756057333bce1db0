"""Short-Weierstrass prime-order groups y^2 = x^3 + ax + b over GF(p).

Points are affine ``(x, y)`` tuples with ``None`` for the identity. Scalar
multiplication runs in Jacobian coordinates: a 4-bit fixed window for
arbitrary points and a precomputed per-window table for the base point.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

from grid_shield.errors import ContractError, InvalidPointError

Point = Optional[tuple[int, int]]
Entropy = Callable[[int], bytes]

_WINDOW = 4
_INFINITY = (1, 1, 0)


@dataclass(frozen=True)
class CurveParams:
    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int

    def __post_init__(self) -> None:
        if (4 * self.a ** 3 + 27 * self.b ** 2) % self.p == 0:
            raise ContractError(f"curve {self.name} is singular")
        if not self.contains((self.gx, self.gy)):
            raise ContractError(f"base point of {self.name} is not on the curve")

    @property
    def g(self) -> tuple[int, int]:
        return (self.gx, self.gy)

    @property
    def field_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_len(self) -> int:
        return (self.n.bit_length() + 7) // 8

    @property
    def point_len(self) -> int:
        """Length of a compressed point encoding."""
        return 1 + self.field_len

    def contains(self, point: Point) -> bool:
        if point is None:
            return False
        x, y = point
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0

    def validate(self, point: Point) -> tuple[int, int]:
        """Return the point, or raise InvalidPointError for identity / off-curve input."""
        if point is None:
            raise InvalidPointError("identity is not a valid public point")
        if not self.contains(point):
            raise InvalidPointError(f"point is not on {self.name}")
        return point

    def add(self, p1: Point, p2: Point) -> Point:
        if p1 is None:
            return p2
        if p2 is None:
            return p1
        return self._affine(_jac_add(self, _jacobian(p1), _jacobian(p2)))

    def neg(self, point: Point) -> Point:
        if point is None:
            return None
        return (point[0], (-point[1]) % self.p)

    def mul(self, k: int, point: Point) -> Point:
        """k * point with a 4-bit fixed window."""
        k %= self.n
        if k == 0 or point is None:
            return None
        table: list[Point] = [None, point]
        acc = _jacobian(point)
        for _ in range(2, 1 << _WINDOW):
            acc = _jac_add_affine(self, acc, point)
            table.append(self._affine(acc))

        result = _INFINITY
        for shift in range(_windows(self.n) * _WINDOW - _WINDOW, -1, -_WINDOW):
            for _ in range(_WINDOW):
                result = _jac_double(self, result)
            digit = (k >> shift) & ((1 << _WINDOW) - 1)
            if digit:
                result = _jac_add_affine(self, result, table[digit])
        return self._affine(result)

    def mul_base(self, k: int) -> Point:
        """k * G using one table lookup and one addition per window."""
        k %= self.n
        if k == 0:
            return None
        table = _base_table(self)
        result = _INFINITY
        for i, row in enumerate(table):
            digit = (k >> (i * _WINDOW)) & ((1 << _WINDOW) - 1)
            if digit:
                result = _jac_add_affine(self, result, row[digit])
        return self._affine(result)

    def random_scalar(self, entropy: Optional[Entropy] = None) -> int:
        """Uniform-enough scalar in [1, n - 1] (64 bits of oversampling)."""
        entropy = entropy or secrets.token_bytes
        raw = int.from_bytes(entropy(self.scalar_len + 8), "big")
        return raw % (self.n - 1) + 1

    def encode_point(self, point: Point) -> bytes:
        """SEC1 compressed encoding: 0x02 | 0x03 prefix by parity of y, then x."""
        x, y = self.validate(point)
        return bytes([2 | (y & 1)]) + x.to_bytes(self.field_len, "big")

    def decode_point(self, data: bytes) -> tuple[int, int]:
        if len(data) != self.point_len:
            raise InvalidPointError(f"point encoding must be {self.point_len} bytes, got {len(data)}")
        prefix = data[0]
        if prefix not in (2, 3):
            raise InvalidPointError(f"unsupported point prefix 0x{prefix:02x}")
        x = int.from_bytes(data[1:], "big")
        if x >= self.p:
            raise InvalidPointError("x coordinate out of range")
        rhs = (x * x * x + self.a * x + self.b) % self.p
        y = sqrt_mod(rhs, self.p)
        if y is None:
            raise InvalidPointError("x coordinate is not on the curve")
        if (y & 1) != (prefix & 1):
            y = (self.p - y) % self.p
        if y == 0 and prefix == 3:
            raise InvalidPointError("no odd y for this x")
        return self.validate((x, y))

    def _affine(self, jac: tuple[int, int, int]) -> Point:
        x, y, z = jac
        if z == 0:
            return None
        z_inv = pow(z, -1, self.p)
        z_inv2 = z_inv * z_inv % self.p
        return (x * z_inv2 % self.p, y * z_inv2 * z_inv % self.p)


def _windows(n: int) -> int:
    return (n.bit_length() + _WINDOW - 1) // _WINDOW


def _jacobian(point: tuple[int, int]) -> tuple[int, int, int]:
    return (point[0], point[1], 1)


def _jac_double(curve: CurveParams, pt: tuple[int, int, int]) -> tuple[int, int, int]:
    x, y, z = pt
    if z == 0 or y == 0:
        return _INFINITY
    p = curve.p
    yy = y * y % p
    s = 4 * x * yy % p
    zz = z * z % p
    m = (3 * x * x + curve.a * zz * zz) % p
    x3 = (m * m - 2 * s) % p
    y3 = (m * (s - x3) - 8 * yy * yy) % p
    z3 = 2 * y * z % p
    return (x3, y3, z3)


def _jac_add(
    curve: CurveParams, p1: tuple[int, int, int], p2: tuple[int, int, int]
) -> tuple[int, int, int]:
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    if z1 == 0:
        return p2
    if z2 == 0:
        return p1
    p = curve.p
    z1z1 = z1 * z1 % p
    z2z2 = z2 * z2 % p
    u1 = x1 * z2z2 % p
    u2 = x2 * z1z1 % p
    s1 = y1 * z2 * z2z2 % p
    s2 = y2 * z1 * z1z1 % p
    h = (u2 - u1) % p
    r = (s2 - s1) % p
    if h == 0:
        return _jac_double(curve, p1) if r == 0 else _INFINITY
    hh = h * h % p
    hhh = h * hh % p
    v = u1 * hh % p
    x3 = (r * r - hhh - 2 * v) % p
    y3 = (r * (v - x3) - s1 * hhh) % p
    z3 = z1 * z2 * h % p
    return (x3, y3, z3)


def _jac_add_affine(curve: CurveParams, p1: tuple[int, int, int], p2: Point) -> tuple[int, int, int]:
    if p2 is None:
        return p1
    x1, y1, z1 = p1
    if z1 == 0:
        return _jacobian(p2)
    p = curve.p
    z1z1 = z1 * z1 % p
    u2 = p2[0] * z1z1 % p
    s2 = p2[1] * z1 * z1z1 % p
    h = (u2 - x1) % p
    r = (s2 - y1) % p
    if h == 0:
        return _jac_double(curve, p1) if r == 0 else _INFINITY
    hh = h * h % p
    hhh = h * hh % p
    v = x1 * hh % p
    x3 = (r * r - hhh - 2 * v) % p
    y3 = (r * (v - x3) - y1 * hhh) % p
    z3 = z1 * h % p
    return (x3, y3, z3)


@lru_cache(maxsize=None)
def _base_table(curve: CurveParams) -> list[list[Point]]:
    """row i holds j * 16^i * G for j in 0..15."""
    rows: list[list[Point]] = []
    base: Point = curve.g
    for _ in range(_windows(curve.n)):
        row: list[Point] = [None, base]
        for _ in range(2, 1 << _WINDOW):
            row.append(curve.add(row[-1], base))
        rows.append(row)
        base = curve.add(row[-1], base)
    return rows


def sqrt_mod(value: int, p: int) -> Optional[int]:
    """A square root of ``value`` mod odd prime ``p``, or None (Tonelli-Shanks)."""
    value %= p
    if value == 0:
        return 0
    if pow(value, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(value, (p + 1) // 4, p)

    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(value, q, p), pow(value, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


P256 = CurveParams(
    name="P-256",
    p=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF,
    a=0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFC,
    b=0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B,
    gx=0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296,
    gy=0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5,
    n=0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551,
)

# 19-element group for hand-checkable tests.
TOY17 = CurveParams(name="toy17", p=17, a=2, b=2, gx=5, gy=1, n=19)

CURVES = {curve.name: curve for curve in (P256, TOY17)}
