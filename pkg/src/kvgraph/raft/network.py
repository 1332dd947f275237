"""Drives a set of Raft nodes over a ``SimTransport`` in abstract ticks."""

from __future__ import annotations

from typing import Hashable

from .node import RaftNode
from .transport import SimTransport


class RaftNetwork:
    """Owns the clock and moves messages between live nodes.

    Nodes of any number of Raft groups may share one network as long as node
    ids are globally unique.  Every node writes into one shared outbox so a
    delivery round only touches nodes that actually have traffic.
    """

    def __init__(self, transport: SimTransport | None = None):
        self.transport = transport or SimTransport()
        self.nodes: dict[Hashable, RaftNode] = {}
        self.crashed: set = set()
        self.now = 0
        self._outbox: list = []

    def add(self, node: RaftNode) -> RaftNode:
        node.outbox = self._outbox
        self.nodes[node.id] = node
        self.crashed.discard(node.id)
        self.transport.down.discard(node.id)
        return node

    def remove(self, node_id):
        self.nodes.pop(node_id, None)
        self.crashed.discard(node_id)
        self.transport.down.discard(node_id)

    def crash(self, node_id):
        """Stop a node; its volatile state is lost, its ``durable`` record is kept."""
        self.crashed.add(node_id)
        self.transport.down.add(node_id)

    def restart(self, node: RaftNode) -> RaftNode:
        return self.add(node)

    def alive(self, node_id) -> bool:
        return node_id in self.nodes and node_id not in self.crashed

    def flush(self):
        if not self._outbox:
            return
        out = self._outbox[:]
        self._outbox.clear()
        send = self.transport.send
        now = self.now
        for m in out:
            if m.src not in self.crashed:
                send(m, now)

    def deliver(self, max_rounds: int = 10_000):
        """Deliver due messages until none remain due at the current tick."""
        nodes = self.nodes
        crashed = self.crashed
        for _ in range(max_rounds):
            self.flush()
            batch = self.transport.due(self.now)
            if not batch:
                return
            for m in batch:
                n = nodes.get(m.dst)
                if n is not None and m.dst not in crashed:
                    n.step(m)
        self.flush()

    def tick(self, n: int = 1):
        for _ in range(n):
            self.now += 1
            crashed = self.crashed
            for nid, node in self.nodes.items():
                if nid not in crashed:
                    node.tick()
            self.deliver()

    run_until_idle = deliver
