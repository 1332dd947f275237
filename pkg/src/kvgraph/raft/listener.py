"""Ships committed entries from a non-voting listener replica to a sink."""

from __future__ import annotations

import struct
from typing import Any, Callable, Optional

from ..kvstore import Disk, Partition
from .node import RaftNode

Sink = Callable[[int, int, Any], bool]  # (index, term, payload) -> acked

_PROGRESS = b"progress"
_U64 = struct.Struct(">Q")


class ListenerHandle:
    """Delivers ``node``'s committed log to ``sink`` in order, at least once.

    Progress is the listener's own WAL-backed record, so after a restart it
    resumes from the last acknowledged index.
    """

    def __init__(self, node: RaftNode, sink: Sink, disk: Disk, name: str):
        self.node = node
        self.sink = sink
        self.progress = Partition(0, disk, f"listeners/{name}")
        raw = self.progress.get(_PROGRESS)
        self.shipped = _U64.unpack(raw)[0] if raw else 0
        self.failures = 0

    def rebind(self, node: RaftNode):
        self.node = node

    def backlog(self) -> int:
        return max(0, self.node.commit_index - self.shipped)

    def pump(self, limit: Optional[int] = None) -> int:
        """Ship committed entries after ``shipped``; stops at the first unacked one."""
        n = 0
        log = self.node.log
        while self.shipped < self.node.commit_index and (limit is None or n < limit):
            idx = self.shipped + 1
            term, payload = log[idx - 1]
            try:
                ok = self.sink(idx, term, payload)
            except Exception:
                ok = False
            if not ok:
                self.failures += 1
                break
            self.shipped = idx
            self.progress.put(_PROGRESS, _U64.pack(idx))
            n += 1
        return n


def subscribe_listener(node: RaftNode, sink: Sink, disk: Disk, name: Optional[str] = None) -> ListenerHandle:
    if not node.is_listener:
        raise ValueError(f"{node.id!r} is a voter, not a listener")
    return ListenerHandle(node, sink, disk, name or str(node.id))
