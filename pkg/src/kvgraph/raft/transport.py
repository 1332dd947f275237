"""Deterministic, fault-injectable in-process message transport."""

from __future__ import annotations

import heapq
import itertools
import random
from typing import Hashable, Iterable, Optional


class SimTransport:
    """Delivers messages after a seeded random delay, honoring drops,
    crashed nodes and network partitions.

    Every message is delivered at most once.  With ``delay=(0, 0)`` messages
    become due in the same tick they are sent, which the in-process cluster
    uses to run request/response round trips synchronously.
    """

    def __init__(
        self,
        seed: int = 0,
        delay: tuple[int, int] = (1, 1),
        drop: float = 0.0,
        record: bool = False,
    ):
        self.rng = random.Random(seed)
        self.delay = delay
        self.drop = drop
        self.link_delay: dict[tuple, tuple[int, int]] = {}
        self.link_drop: dict[tuple, float] = {}
        self.groups: Optional[list[frozenset]] = None
        self.down: set = set()
        self.record = record
        self.delivered: list = []
        self.sent = 0
        self.dropped = 0
        self.delivered_count = 0
        self._queue: list = []
        self._seq = itertools.count()

    # -- faults ----------------------------------------------------------
    def partition(self, groups: Iterable[Iterable[Hashable]]):
        """Only nodes inside the same group can talk; unlisted nodes are isolated."""
        self.groups = [frozenset(g) for g in groups]

    def heal(self):
        self.groups = None

    def blocked(self, a, b) -> bool:
        if a in self.down or b in self.down:
            return True
        if self.groups is None:
            return False
        for g in self.groups:
            if a in g:
                return b not in g
        return True

    # -- delivery --------------------------------------------------------
    def send(self, msg, now: int):
        self.sent += 1
        link = (msg.src, msg.dst)
        p = self.link_drop.get(link, self.drop)
        if (self.down or self.groups is not None) and self.blocked(msg.src, msg.dst):
            self.dropped += 1
            return
        if p > 0.0 and self.rng.random() < p:
            self.dropped += 1
            return
        lo, hi = self.link_delay.get(link, self.delay)
        d = lo if lo == hi else lo + int(self.rng.random() * (hi - lo + 1))
        heapq.heappush(self._queue, (now + d, next(self._seq), msg))

    def due(self, now: int) -> list:
        """Pop every message due at ``now`` whose link is still open."""
        out = []
        q = self._queue
        while q and q[0][0] <= now:
            _, _, msg = heapq.heappop(q)
            if self.blocked(msg.src, msg.dst):
                self.dropped += 1
                continue
            self.delivered_count += 1
            if self.record:
                self.delivered.append((now, msg))
            out.append(msg)
        return out

    def pending(self) -> int:
        return len(self._queue)

    def clear(self):
        self._queue.clear()
