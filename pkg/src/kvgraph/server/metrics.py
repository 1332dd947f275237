"""Counters and latency histograms over sliding windows.

``dump()`` prints ``name.stat.window value`` lines, e.g. ``query.count.60s 12``.
"""

from __future__ import annotations

import bisect
import math
import threading
import time
from collections import deque
from typing import Callable, Optional

WINDOWS = (5, 60, 600, 3600)
STATS = ("sum", "count", "avg", "p75", "p95", "p99")


def quantile(sorted_values: list, q: float) -> float:
    """Nearest-rank quantile of an ascending list (0 for an empty one)."""
    if not sorted_values:
        return 0
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


class MetricsRegistry:
    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self.clock = clock
        self._series: dict[str, deque] = {}
        self._gauges: dict[str, Callable[[], float]] = {}
        self._mu = threading.Lock()

    def observe(self, name: str, value: float = 1.0):
        """Record one event; counters are series whose values are all 1."""
        now = self.clock()
        with self._mu:
            q = self._series.setdefault(name, deque())
            q.append((now, value))
            horizon = now - WINDOWS[-1]
            while q and q[0][0] < horizon:
                q.popleft()

    inc = observe

    def declare(self, name: str):
        with self._mu:
            self._series.setdefault(name, deque())

    def gauge(self, name: str, fn: Callable[[], float]):
        self._gauges[name] = fn

    def stats(self, name: str, window: int, now: Optional[float] = None) -> dict:
        now = self.clock() if now is None else now
        with self._mu:
            q = list(self._series.get(name, ()))
        times = [t for t, _ in q]
        start = bisect.bisect_left(times, now - window)
        values = sorted(v for _, v in q[start:])
        total = sum(values)
        n = len(values)
        return {
            "sum": total,
            "count": n,
            "avg": total / n if n else 0,
            "p75": quantile(values, 0.75),
            "p95": quantile(values, 0.95),
            "p99": quantile(values, 0.99),
        }

    def names(self) -> list[str]:
        with self._mu:
            return sorted(self._series)

    def dump(self) -> str:
        now = self.clock()
        lines = []
        for name in self.names():
            for w in WINDOWS:
                st = self.stats(name, w, now)
                for stat in STATS:
                    v = st[stat]
                    lines.append(f"{name}.{stat}.{w}s {_fmt(v)}")
        for name in sorted(self._gauges):
            try:
                v = self._gauges[name]()
            except Exception:
                v = 0
            lines.append(f"{name} {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float) and not v.is_integer():
        return f"{v:.3f}"
    return str(int(v))


def parse_dump(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            k, v = line.rsplit(" ", 1)
            out[k] = float(v)
    return out
