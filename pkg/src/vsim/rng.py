"""Randomness source, seedable for deterministic scenario runs.

Production code paths default to OS entropy. Tests and the CLI's `seed`
config field substitute a counter-mode DRBG so whole scenarios replay
bit for bit.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading


class Rng:
    """bytes(n) provider: OS entropy, or a SHA-256 counter stream when seeded.

    Safe to share across threads (concurrent server sessions draw nonces
    from one instance).
    """

    def __init__(self, seed: bytes | None = None):
        self._seed = seed
        self._counter = 0
        self._lock = threading.Lock()

    @classmethod
    def system(cls) -> "Rng":
        return cls(None)

    @classmethod
    def from_seed(cls, seed: bytes | str) -> "Rng":
        if isinstance(seed, str):
            seed = seed.encode()
        return cls(seed)

    def bytes(self, n: int) -> bytes:
        if self._seed is None:
            return os.urandom(n)
        with self._lock:
            out = b""
            while len(out) < n:
                out += hashlib.sha256(self._seed + struct.pack(">Q", self._counter)).digest()
                self._counter += 1
            return out[:n]

    def scalar(self, order: int) -> int:
        """Uniform scalar in [1, order) by rejection sampling."""
        byte_len = (order.bit_length() + 7) // 8 + 8
        while True:
            v = int.from_bytes(self.bytes(byte_len), "big") % order
            if v != 0:
                return v


SYSTEM_RNG = Rng.system()
