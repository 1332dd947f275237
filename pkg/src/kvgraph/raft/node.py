"""Single Raft participant driven by ``tick()`` and ``step(msg)`` events.

Nodes never do I/O.  Outbound messages accumulate in ``outbox`` and the
driver (a simulation or the in-process cluster) moves them across a
transport.  Durable state (term, vote, log) lives in ``RaftDurable`` so a
crash can discard the node object and rebuild it from the same durable
record.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, NamedTuple, Optional

from ..errors import NotLeader

FOLLOWER = "follower"
CANDIDATE = "candidate"
LEADER = "leader"
LISTENER = "listener"

HEARTBEAT_TICKS = 1
ELECTION_TIMEOUT = (10, 20)
MAX_BATCH = 64

NodeId = Hashable


class VoteRequest(NamedTuple):
    src: NodeId
    dst: NodeId
    term: int
    last_index: int
    last_term: int


class VoteReply(NamedTuple):
    src: NodeId
    dst: NodeId
    term: int
    granted: bool


class AppendRequest(NamedTuple):
    src: NodeId
    dst: NodeId
    term: int
    prev_index: int
    prev_term: int
    entries: tuple  # ((term, payload), ...)
    commit: int


class AppendReply(NamedTuple):
    src: NodeId
    dst: NodeId
    term: int
    success: bool
    match: int


class TimeoutNow(NamedTuple):
    src: NodeId
    dst: NodeId
    term: int


@dataclass
class RaftDurable:
    """What survives a crash: current term, vote and the log."""

    term: int = 0
    voted_for: Optional[NodeId] = None
    log: list = field(default_factory=list)  # [(term, payload)], index = position + 1


class RaftNode:
    def __init__(
        self,
        node_id: NodeId,
        voters: list,
        listeners: list = (),
        durable: Optional[RaftDurable] = None,
        apply: Optional[Callable[[int, Any], None]] = None,
        rng: Optional[random.Random] = None,
        election_timeout: tuple[int, int] = ELECTION_TIMEOUT,
        applied_index: int = 0,
        on_role: Optional[Callable[["RaftNode"], None]] = None,
        eager_commit: bool = True,
    ):
        self.id = node_id
        self.voters = list(voters)
        self.listeners = list(listeners)
        self.durable = durable if durable is not None else RaftDurable()
        self.apply_fn = apply
        self.rng = rng or random.Random(zlib.crc32(repr(node_id).encode()))
        self.election_range = election_timeout
        self.on_role = on_role
        self.eager_commit = eager_commit
        self.is_listener = node_id not in self.voters
        self.role = LISTENER if self.is_listener else FOLLOWER
        self.leader_id: Optional[NodeId] = None
        self.commit_index = applied_index
        self.last_applied = applied_index
        self.outbox: list = []
        self._votes: set = set()
        self.next_index: dict = {}
        self.match_index: dict = {}
        self._elapsed = 0
        self._hb_elapsed = 0
        self._timeout = self._new_timeout()
        self._transfer_target: Optional[NodeId] = None

    # -- helpers ---------------------------------------------------------
    @property
    def term(self) -> int:
        return self.durable.term

    @property
    def log(self) -> list:
        return self.durable.log

    @property
    def last_index(self) -> int:
        return len(self.durable.log)

    def term_at(self, index: int) -> int:
        return self.durable.log[index - 1][0] if index > 0 else 0

    def _new_timeout(self) -> int:
        lo, hi = self.election_range
        return self.rng.randrange(lo, hi)

    def _peers(self):
        return [p for p in self.voters if p != self.id] + [p for p in self.listeners if p != self.id]

    def _quorum(self) -> int:
        return len(self.voters) // 2 + 1

    def _set_role(self, role):
        if role != self.role:
            self.role = role
            if self.on_role is not None:
                self.on_role(self)

    def _become_follower(self, term: int, leader: Optional[NodeId]):
        if term > self.durable.term:
            self.durable.term = term
            self.durable.voted_for = None
        self.leader_id = leader
        # only a live leader (or our own abdication) restarts the election clock;
        # a refused campaign from a stale peer must not hold back an electable node
        if leader is not None or self.role == LEADER:
            self._elapsed = 0
        self._transfer_target = None
        if not self.is_listener:
            self._set_role(FOLLOWER)

    # -- events ----------------------------------------------------------
    def tick(self):
        if self.role == LEADER:
            self._hb_elapsed += 1
            if self._hb_elapsed >= HEARTBEAT_TICKS:
                self._hb_elapsed = 0
                self.broadcast_append()
            return
        if self.is_listener:
            return
        self._elapsed += 1
        if self._elapsed >= self._timeout:
            self.campaign()

    def campaign(self):
        """Start an election now (also used to bootstrap groups deterministically)."""
        if self.is_listener:
            return
        d = self.durable
        d.term += 1
        d.voted_for = self.id
        self.leader_id = None
        self._votes = {self.id}
        self._elapsed = 0
        self._timeout = self._new_timeout()
        self._set_role(CANDIDATE)
        if len(self._votes) >= self._quorum():
            self._become_leader()
            return
        lt = self.term_at(self.last_index)
        for p in self.voters:
            if p != self.id:
                self.outbox.append(VoteRequest(self.id, p, d.term, self.last_index, lt))

    def _become_leader(self):
        self.leader_id = self.id
        self._transfer_target = None
        nxt = self.last_index + 1
        self.next_index = {p: nxt for p in self._peers()}
        self.match_index = {p: 0 for p in self._peers()}
        self._set_role(LEADER)
        # a current-term entry lets earlier-term entries commit
        self.durable.log.append((self.durable.term, None))
        self._maybe_commit()
        self.broadcast_append()

    def propose(self, payload) -> int:
        if self.role != LEADER:
            raise NotLeader(leader_hint=self.leader_id)
        if self._transfer_target is not None:
            raise NotLeader("leadership transfer in progress", leader_hint=self._transfer_target)
        self.durable.log.append((self.durable.term, payload))
        index = self.last_index
        self._maybe_commit()
        self.broadcast_append()
        return index

    def broadcast_append(self):
        for p in self._peers():
            self._send_append(p)

    def _send_append(self, peer):
        nxt = self.next_index.get(peer, self.last_index + 1)
        prev = nxt - 1
        entries = tuple(self.durable.log[prev : prev + MAX_BATCH])
        self.outbox.append(
            AppendRequest(self.id, peer, self.durable.term, prev, self.term_at(prev), entries, self.commit_index)
        )

    def step(self, msg):
        t = type(msg)
        if t is AppendRequest:
            self._on_append(msg)
        elif t is AppendReply:
            self._on_append_reply(msg)
        elif t is VoteRequest:
            self._on_vote_request(msg)
        elif t is VoteReply:
            self._on_vote_reply(msg)
        elif t is TimeoutNow:
            if msg.term == self.durable.term and not self.is_listener:
                self.campaign()

    def _on_vote_request(self, m: VoteRequest):
        if self.is_listener:
            return  # listeners never vote
        d = self.durable
        if m.term > d.term:
            self._become_follower(m.term, None)
        granted = False
        if m.term == d.term and d.voted_for in (None, m.src):
            my_last_term = self.term_at(self.last_index)
            up_to_date = m.last_term > my_last_term or (
                m.last_term == my_last_term and m.last_index >= self.last_index
            )
            if up_to_date:
                granted = True
                d.voted_for = m.src
                self._elapsed = 0
        self.outbox.append(VoteReply(self.id, m.src, d.term, granted))

    def _on_vote_reply(self, m: VoteReply):
        if m.term > self.durable.term:
            self._become_follower(m.term, None)
            return
        if self.role != CANDIDATE or m.term != self.durable.term or not m.granted:
            return
        self._votes.add(m.src)
        if len(self._votes) >= self._quorum():
            self._become_leader()

    def _on_append(self, m: AppendRequest):
        d = self.durable
        if m.term < d.term:
            self.outbox.append(AppendReply(self.id, m.src, d.term, False, 0))
            return
        if m.term > d.term or self.role != FOLLOWER or self.leader_id != m.src:
            self._become_follower(m.term, m.src)
        self._elapsed = 0
        log = d.log
        if m.prev_index > len(log) or (m.prev_index > 0 and log[m.prev_index - 1][0] != m.prev_term):
            hint = min(len(log), m.prev_index - 1)
            self.outbox.append(AppendReply(self.id, m.src, d.term, False, hint))
            return
        idx = m.prev_index
        for entry in m.entries:
            idx += 1
            if idx <= len(log):
                if log[idx - 1][0] == entry[0]:
                    continue
                if idx <= self.commit_index:
                    raise AssertionError("attempt to overwrite a committed entry")
                del log[idx - 1 :]
            log.append(entry)
        match = m.prev_index + len(m.entries)
        if m.commit > self.commit_index:
            self.commit_index = min(m.commit, match)
            self._apply_committed()
        self.outbox.append(AppendReply(self.id, m.src, d.term, True, match))

    def _on_append_reply(self, m: AppendReply):
        if m.term > self.durable.term:
            self._become_follower(m.term, None)
            return
        if self.role != LEADER or m.term != self.durable.term:
            return
        if m.success:
            if m.match > self.match_index.get(m.src, 0):
                self.match_index[m.src] = m.match
            self.next_index[m.src] = max(self.next_index.get(m.src, 1), m.match + 1)
            if self._maybe_commit() and self.eager_commit:
                self.broadcast_append()
            elif self.next_index[m.src] <= self.last_index:
                self._send_append(m.src)
            if self._transfer_target == m.src and m.match >= self.last_index:
                self.outbox.append(TimeoutNow(self.id, m.src, self.durable.term))
        else:
            self.next_index[m.src] = max(1, min(self.next_index.get(m.src, 1) - 1, m.match + 1))
            self._send_append(m.src)

    def _maybe_commit(self) -> bool:
        """Advance commit_index to the highest current-term index held by a voter quorum."""
        log = self.durable.log
        n = len(log)
        advanced = False
        q = self._quorum()
        while n > self.commit_index:
            if log[n - 1][0] != self.durable.term:
                break
            count = 1 if self.id in self.voters else 0
            for p in self.voters:
                if p != self.id and self.match_index.get(p, 0) >= n:
                    count += 1
            if count >= q:
                self.commit_index = n
                advanced = True
                break
            n -= 1
        if advanced:
            self._apply_committed()
        return advanced

    def _apply_committed(self):
        log = self.durable.log
        while self.last_applied < self.commit_index:
            self.last_applied += 1
            if self.apply_fn is not None:
                self.apply_fn(self.last_applied, log[self.last_applied - 1][1])

    def transfer_to(self, target: NodeId):
        """Begin handing leadership to ``target`` (a voter)."""
        if self.role != LEADER:
            raise NotLeader(leader_hint=self.leader_id)
        if target == self.id:
            return
        self._transfer_target = target
        if self.match_index.get(target, 0) >= self.last_index:
            self.outbox.append(TimeoutNow(self.id, target, self.durable.term))
        else:
            self._send_append(target)

    def drain(self) -> list:
        out, self.outbox = self.outbox, []
        return out
