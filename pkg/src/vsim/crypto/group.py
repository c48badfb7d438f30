"""Prime-order group used by every public-key operation in the suite.

The group is the order-L subgroup of edwards25519. Elements are encoded in
32 bytes (little-endian y with the sign of x in the top bit); decoding
rejects non-canonical encodings, off-curve points, the identity, and any
point outside the prime-order subgroup, so the exposed group really is of
prime order L.

This is a value-level implementation (plain Python integers, no
constant-time effort): the artifact trades side-channel hardening for
auditability, which the package documents as a non-goal.
"""

from __future__ import annotations

import hashlib

from ..errors import InvalidPoint

P = 2**255 - 19
# order of the prime subgroup
L = 2**252 + 27742317777372353535851937790883648493
D = (-121665 * pow(121666, P - 2, P)) % P
SQRT_M1 = pow(2, (P - 1) // 4, P)


def _recover_x(y: int, sign: int) -> int:
    """RFC 8032 point decompression; raises InvalidPoint when y is not on the curve."""
    if y >= P:
        raise InvalidPoint("field element out of range")
    x2 = (y * y - 1) * pow(D * y * y + 1, P - 2, P) % P
    if x2 == 0:
        if sign:
            raise InvalidPoint("non-canonical sign for x = 0")
        return 0
    x = pow(x2, (P + 3) // 8, P)
    if (x * x - x2) % P != 0:
        x = x * SQRT_M1 % P
    if (x * x - x2) % P != 0:
        raise InvalidPoint("not a curve point")
    if x & 1 != sign:
        x = P - x
    return x


class Point:
    """Group element in extended homogeneous coordinates."""

    __slots__ = ("x", "y", "z", "t")

    def __init__(self, x: int, y: int, z: int, t: int):
        self.x, self.y, self.z, self.t = x, y, z, t

    def __add__(self, other: "Point") -> "Point":
        a = (self.y - self.x) * (other.y - other.x) % P
        b = (self.y + self.x) * (other.y + other.x) % P
        c = 2 * self.t * other.t * D % P
        d = 2 * self.z * other.z % P
        e, f, g, h = b - a, d - c, d + c, b + a
        return Point(e * f % P, g * h % P, f * g % P, e * h % P)

    def double(self) -> "Point":
        a = self.x * self.x % P
        b = self.y * self.y % P
        c = 2 * self.z * self.z % P
        h = a + b
        e = h - (self.x + self.y) ** 2 % P
        g = a - b
        f = c + g
        return Point(e * f % P, g * h % P, f * g % P, e * h % P)

    def __neg__(self) -> "Point":
        return Point(-self.x % P, self.y, self.z, -self.t % P)

    def __mul__(self, k: int) -> "Point":
        # no reduction mod L here: the subgroup check multiplies by L itself,
        # and reducing first would trivialize it for out-of-subgroup points
        if k < 0:
            raise ValueError("scalar must be non-negative")
        r = IDENTITY
        q = self
        while k:
            if k & 1:
                r = r + q
            q = q.double()
            k >>= 1
        return r

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return (
            (self.x * other.z - other.x * self.z) % P == 0
            and (self.y * other.z - other.y * self.z) % P == 0
        )

    def __hash__(self):  # pragma: no cover - Points are not dict keys
        return hash(self.encode())

    def is_identity(self) -> bool:
        return self.x % P == 0 and (self.y - self.z) % P == 0

    def encode(self) -> bytes:
        zinv = pow(self.z, P - 2, P)
        x = self.x * zinv % P
        y = self.y * zinv % P
        return (y | ((x & 1) << 255)).to_bytes(32, "little")


IDENTITY = Point(0, 1, 1, 0)

_g_y = 4 * pow(5, P - 2, P) % P
GENERATOR = Point(_recover_x(_g_y, 0), _g_y, 1, _recover_x(_g_y, 0) * _g_y % P)


def decode(data: bytes, allow_identity: bool = False) -> Point:
    """Decode 32 bytes into a subgroup element.

    Rejects wrong lengths, non-canonical encodings, points off the curve,
    points outside the order-L subgroup, and (by default) the identity.
    """
    if len(data) != 32:
        raise InvalidPoint("group elements are 32 bytes")
    sign = data[31] >> 7
    y = int.from_bytes(data, "little") & ((1 << 255) - 1)
    x = _recover_x(y, sign)
    point = Point(x, y, 1, x * y % P)
    if point.is_identity():
        if not allow_identity:
            raise InvalidPoint("identity element rejected")
        return point
    if not (point * L).is_identity():
        raise InvalidPoint("point outside the prime-order subgroup")
    return point


def hash_to_scalar(*chunks: bytes, domain: bytes) -> int:
    """SHA-256 of domain-separated input, reduced into [1, L)."""
    counter = 0
    while True:
        h = hashlib.sha256()
        h.update(domain)
        for chunk in chunks:
            h.update(chunk)
        if counter:
            h.update(counter.to_bytes(4, "big"))
        v = int.from_bytes(h.digest(), "big") % L
        if v != 0:
            return v
        counter += 1


def hash_to_group(data: bytes, domain: bytes = b"vsim-hash2group") -> Point:
    """Deterministic basepoint derivation: hash to a scalar, multiply the generator."""
    return GENERATOR * hash_to_scalar(data, domain=domain)


def scalar_to_bytes(s: int) -> bytes:
    return (s % L).to_bytes(32, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != 32:
        raise InvalidPoint("scalars are 32 bytes")
    return int.from_bytes(data, "big") % L
