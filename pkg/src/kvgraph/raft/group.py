"""A replicated state machine: one Raft group whose replicas live on hosts."""

from __future__ import annotations

import random
import zlib
from typing import Any, Callable, Hashable, Optional, Protocol

from ..errors import GraphError, NodeDown, NotLeader, QuorumTimeout, TransferTimeout
from .network import RaftNetwork
from .node import LEADER, RaftDurable, RaftNode


class StateMachine(Protocol):
    def apply(self, index: int, payload: Any) -> Any: ...
    def applied_index(self) -> int: ...


class ReplicatedGroup:
    """Replicas of one group on a shared ``RaftNetwork``.

    ``make_sm(host)`` builds (or reopens) the state machine for a replica;
    it must report the last applied log index it has durably absorbed so a
    restarted replica does not apply entries twice.
    """

    def __init__(
        self,
        network: RaftNetwork,
        name: Hashable,
        hosts: list,
        make_sm: Callable[[Hashable], StateMachine],
        election_timeout: tuple[int, int] = (10, 20),
    ):
        self.network = network
        self.name = name
        self.hosts = list(hosts)
        self.make_sm = make_sm
        self.election_timeout = election_timeout
        self.durables: dict = {h: RaftDurable() for h in self.hosts}
        self.sms: dict = {}
        self.nodes: dict = {}
        self.listener_hosts: list = []
        self._listener_sm: dict = {}
        self._results: dict[int, Any] = {}
        for h in self.hosts:
            self._start(h)

    # -- ids -------------------------------------------------------------
    def node_id(self, host) -> tuple:
        return (self.name, host)

    def _voter_ids(self):
        return [self.node_id(h) for h in self.hosts]

    def _listener_ids(self):
        return [self.node_id(h) for h in self.listener_hosts]

    # -- lifecycle -------------------------------------------------------
    def _start(self, host, sm: Optional[StateMachine] = None) -> RaftNode:
        if sm is None:
            sm = self._listener_sm[host](host) if host in self._listener_sm else self.make_sm(host)
        self.sms[host] = sm
        nid = self.node_id(host)
        node = RaftNode(
            nid,
            self._voter_ids(),
            self._listener_ids(),
            durable=self.durables[host],
            apply=lambda idx, payload, host=host: self._apply(host, idx, payload),
            rng=random.Random(zlib.crc32(repr(nid).encode()) + len(self.durables[host].log)),
            election_timeout=self.election_timeout,
            applied_index=sm.applied_index(),
        )
        self.nodes[host] = node
        self.network.add(node)
        return node

    def _apply(self, host, index, payload):
        node = self.nodes.get(host)
        try:
            result = self.sms[host].apply(index, payload)
        except GraphError as e:
            result = e
        if payload is not None and node is not None and node.role == LEADER:
            self._results[index] = result

    def bootstrap(self, host=None):
        """Elect ``host`` (default: first replica) without waiting for timeouts."""
        host = self.hosts[0] if host is None else host
        self.nodes[host].campaign()
        self.network.deliver()

    def crash(self, host):
        self.network.crash(self.node_id(host))

    def restart(self, host) -> RaftNode:
        self.network.remove(self.node_id(host))
        return self._start(host)

    def alive(self, host) -> bool:
        return self.network.alive(self.node_id(host))

    def add_listener(self, host, make_sm: Optional[Callable] = None) -> RaftNode:
        """Attach a non-voting replica; every voter learns about it."""
        if host in self.listener_hosts or host in self.hosts:
            return self.nodes[host]
        self.listener_hosts.append(host)
        self.durables[host] = RaftDurable()
        lid = self.node_id(host)
        for h, n in self.nodes.items():
            if lid not in n.listeners:
                n.listeners.append(lid)
            if n.role == LEADER:
                n.next_index[lid] = 1
                n.match_index[lid] = 0
        self._listener_sm[host] = make_sm if make_sm is not None else (lambda h: _NullSM())
        node = self._start(host)
        ld = self.leader()
        if ld is not None:
            ld.broadcast_append()
            self.network.deliver()
        return node

    # -- leadership ------------------------------------------------------
    def leader(self) -> Optional[RaftNode]:
        best = None
        for h in self.hosts:
            n = self.nodes.get(h)
            if n is not None and self.alive(h) and n.role == LEADER:
                if best is None or n.term > best.term:
                    best = n
        return best

    def leader_host(self):
        ld = self.leader()
        return None if ld is None else ld.id[1]

    @staticmethod
    def _caught_up(ld: RaftNode) -> bool:
        # a fresh leader may still be replaying earlier-term entries; it is only
        # safe to read once an entry of its own term has committed and applied
        return ld.term_at(ld.commit_index) == ld.term and ld.last_applied >= ld.commit_index

    def wait_leader(self, max_ticks: int = 200) -> RaftNode:
        for _ in range(max_ticks + 1):
            ld = self.leader()
            if ld is not None and self._caught_up(ld):
                return ld
            self.network.tick()
        raise QuorumTimeout(f"group {self.name!r}: no leader after {max_ticks} ticks")

    def leader_sm(self) -> StateMachine:
        ld = self.wait_leader()
        return self.sms[ld.id[1]]

    def propose(self, payload, max_ticks: int = 200) -> Any:
        """Replicate ``payload``; returns the leader's apply result (raises it if an error)."""
        ld = self.wait_leader(max_ticks)
        index = ld.propose(payload)
        term = ld.term
        self.network.deliver()
        ticks = 0
        while True:
            if index in self._results:
                result = self._results.pop(index)
                if isinstance(result, GraphError):
                    raise result
                return result
            cur = self.leader()
            if cur is not None and cur.commit_index >= index and cur.term_at(index) != term:
                raise NotLeader(f"entry {index} superseded", leader_hint=cur.id[1])
            if ticks >= max_ticks:
                raise QuorumTimeout(f"group {self.name!r}: entry {index} not committed")
            self.network.tick()
            ticks += 1

    def read_sm(self, require_leader: bool = True) -> StateMachine:
        if require_leader:
            return self.leader_sm()
        for h in self.hosts:
            if self.alive(h):
                return self.sms[h]
        raise NodeDown(f"group {self.name!r}: no live replica")

    def transfer_leader(self, target, max_ticks: int = 100):
        if target not in self.hosts:
            raise TransferTimeout(f"{target!r} is not a voter of {self.name!r}")
        ld = self.wait_leader()
        if ld.id[1] == target:
            return
        ld.transfer_to(self.node_id(target))
        self.network.deliver()
        for _ in range(max_ticks):
            if self.leader_host() == target:
                return
            self.network.tick()
        if self.leader_host() == target:
            return
        cur = self.leader()
        if cur is not None:
            cur._transfer_target = None
        raise TransferTimeout(f"{target!r} did not take leadership of {self.name!r}")

    # -- membership (stop-copy) ------------------------------------------
    def reconfigure(self, new_hosts: list, copy_replica: Callable[[Hashable, Hashable], None]):
        """Stop the group and restart it on ``new_hosts``.

        ``copy_replica(src, dst)`` must copy the state-machine data of a
        current replica to a newly added host; the Raft log is copied here.
        """
        ld = self.wait_leader()
        source = ld.id[1]
        for h in self.hosts + self.listener_hosts:
            self.network.remove(self.node_id(h))
        added = [h for h in new_hosts if h not in self.hosts]
        for h in added:
            copy_replica(source, h)
            src = self.durables[source]
            self.durables[h] = RaftDurable(src.term, None, list(src.log))
        for h in self.hosts:
            if h not in new_hosts:
                self.durables.pop(h, None)
                self.sms.pop(h, None)
                self.nodes.pop(h, None)
        self.hosts = list(new_hosts)
        for h in self.hosts + self.listener_hosts:
            self._start(h)
        self.bootstrap(source if source in self.hosts else self.hosts[0])


class _NullSM:
    """State machine of a listener that only relays the log."""

    def apply(self, index, payload):
        pass

    def applied_index(self):
        return 0
