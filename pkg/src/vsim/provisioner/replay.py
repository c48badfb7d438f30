"""Replay cache over client hello nonces.

A nonce seen within the window is rejected; entries age out after max_age
seconds and the cache is capped at max_size entries (oldest evicted first).
"""

from __future__ import annotations

import threading
import time
from collections import OrderedDict
from typing import Callable


class ReplayCache:
    def __init__(
        self,
        max_age: float = 300.0,
        max_size: int = 4096,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.max_age = max_age
        self.max_size = max_size
        self._clock = clock
        self._seen: OrderedDict[bytes, float] = OrderedDict()
        self._lock = threading.Lock()

    def _evict(self, now: float) -> None:
        while self._seen:
            nonce, ts = next(iter(self._seen.items()))
            if now - ts > self.max_age or len(self._seen) > self.max_size:
                del self._seen[nonce]
            else:
                break

    def check_and_add(self, nonce: bytes) -> bool:
        """True if the nonce is fresh (and now recorded); False on replay."""
        with self._lock:
            now = self._clock()
            self._evict(now)
            if nonce in self._seen:
                return False
            self._seen[nonce] = now
            self._evict(now)
            return True

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)
