"""Seeded Raft simulations with fault schedules and safety checkers.

A scenario is a JSON document::

    {"voters": 3, "listeners": 1, "seed": 7, "ticks": 10000,
     "delay": [1, 3], "drop": 0.05, "propose_every": 5,
     "faults": [{"at": 100, "op": "crash", "node": 0},
                {"at": 400, "op": "restart", "node": 0},
                {"at": 900, "op": "partition", "groups": [[0], [1, 2, 3]]},
                {"at": 1200, "op": "heal"}]}

Node ids are integers; voters come first, then listeners.  ``run()``
returns a ``SimReport`` with every safety violation found; the trace is a
list of JSON-serialisable events (role changes, commits, faults).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

from ..errors import TransferTimeout
from ..kvstore import MemoryDisk
from .listener import ListenerHandle, subscribe_listener
from .network import RaftNetwork
from .node import CANDIDATE, LEADER, LISTENER, RaftDurable, RaftNode, VoteReply, VoteRequest
from .transport import SimTransport


@dataclass
class SimReport:
    seed: int
    ticks: int
    violations: list = field(default_factory=list)
    committed: int = 0
    leaders_by_term: dict = field(default_factory=dict)
    listener_received: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


class _CheckingTransport(SimTransport):
    """Flags any vote traffic originating from a listener."""

    def __init__(self, listeners: set, violations: list, **kw):
        super().__init__(**kw)
        self._listeners = listeners
        self._violations = violations

    def send(self, msg, now):
        if msg.src in self._listeners and type(msg) in (VoteRequest, VoteReply):
            self._violations.append(f"listener {msg.src} sent {type(msg).__name__} at {now}")
        super().send(msg, now)


class RaftSim:
    def __init__(
        self,
        voters: int = 3,
        listeners: int = 0,
        seed: int = 0,
        delay: tuple[int, int] = (1, 3),
        drop: float = 0.0,
        sink_drop: float = 0.0,
        trace: bool = False,
    ):
        self.seed = seed
        self.rng = random.Random(seed)
        self.voter_ids = list(range(voters))
        self.listener_ids = list(range(voters, voters + listeners))
        self.violations: list[str] = []
        self.transport = _CheckingTransport(
            set(self.listener_ids), self.violations, seed=seed, delay=tuple(delay), drop=drop
        )
        self.net = RaftNetwork(self.transport)
        self.durables = {i: RaftDurable() for i in self.voter_ids + self.listener_ids}
        self.trace_enabled = trace
        self.trace: list[dict] = []
        self.leaders_by_term: dict[int, set] = {}
        self.chosen: dict[int, tuple] = {}
        self.applied: dict[int, list] = {i: [] for i in self.durables}
        self.sink_drop = sink_drop
        self.sink_rng = random.Random(seed ^ 0x5EED)
        self.received: dict[int, list[int]] = {i: [] for i in self.listener_ids}
        self.disk = MemoryDisk()
        self.handles: dict[int, ListenerHandle] = {}
        self._proposals = 0
        for i in self.durables:
            self._start(i)

    # -- node lifecycle --------------------------------------------------
    def _start(self, i: int):
        node = RaftNode(
            i,
            self.voter_ids,
            self.listener_ids,
            durable=self.durables[i],
            apply=lambda idx, payload, i=i: self._on_apply(i, idx, payload),
            rng=random.Random(self.seed * 1000 + i + 7919 * len(self.applied[i])),
            on_role=self._on_role,
            eager_commit=False,
        )
        # the state machine is volatile in this simulation: it is rebuilt from the log
        self.applied[i] = []
        self.net.add(node)
        if i in self.listener_ids:
            if i in self.handles:
                self.handles[i].rebind(node)
            else:
                self.handles[i] = subscribe_listener(node, self._sink_for(i), self.disk, f"sim-{i}")
        return node

    def crash(self, i: int):
        self.net.crash(i)
        self._event("crash", node=i)

    def restart(self, i: int):
        if i in self.net.crashed:
            self._start(i)
            self._event("restart", node=i)

    def partition(self, groups):
        self.transport.partition(groups)
        self._event("partition", groups=[sorted(g) for g in groups])

    def heal(self):
        self.transport.heal()
        self._event("heal")

    # -- hooks -----------------------------------------------------------
    def _event(self, kind, **kw):
        if self.trace_enabled:
            self.trace.append({"tick": self.net.now, "event": kind, **kw})

    def _on_role(self, node: RaftNode):
        self._event("role", node=node.id, role=node.role, term=node.term)
        if node.id in self.listener_ids and node.role in (LEADER, CANDIDATE):
            self.violations.append(f"listener {node.id} became {node.role}")
        if node.role == LEADER:
            holders = self.leaders_by_term.setdefault(node.term, set())
            holders.add(node.id)
            if len(holders) > 1:
                self.violations.append(f"term {node.term} has leaders {sorted(holders)}")
            for idx, entry in self.chosen.items():
                if idx > node.last_index or node.log[idx - 1] != entry:
                    self.violations.append(f"leader {node.id} term {node.term} lacks committed entry {idx}")
                    break

    def _on_apply(self, i, idx, payload):
        node = self.net.nodes[i]
        entry = node.log[idx - 1]
        known = self.chosen.get(idx)
        if known is None:
            self.chosen[idx] = entry
            self._event("commit", node=i, index=idx, term=entry[0])
        elif known != entry:
            self.violations.append(f"node {i} applied {entry} at {idx}, but {known} was committed")
        seq = self.applied[i]
        if len(seq) + 1 != idx:
            self.violations.append(f"node {i} applied index {idx} out of order")
        seq.append(entry)

    def _sink_for(self, i):
        def sink(idx, term, payload):
            if self.sink_drop and self.sink_rng.random() < self.sink_drop:
                return False
            self.received[i].append(idx)
            return True

        return sink

    # -- driving ---------------------------------------------------------
    def leader(self) -> Optional[RaftNode]:
        best = None
        for i in self.voter_ids:
            if self.net.alive(i):
                n = self.net.nodes[i]
                if n.role == LEADER and (best is None or n.term > best.term):
                    best = n
        return best

    def propose(self, payload) -> Optional[int]:
        ld = self.leader()
        if ld is None:
            return None
        try:
            idx = ld.propose(payload)
        except Exception:
            return None
        self.net.deliver()
        return idx

    def tick(self, n: int = 1):
        for _ in range(n):
            self.net.tick()
            for i, h in self.handles.items():
                if self.net.alive(i):
                    h.pump()

    def transfer_leader(self, target: int, max_ticks: int = 100):
        ld = self.leader()
        if ld is None:
            raise TransferTimeout("no leader")
        if ld.id == target:
            return
        ld.transfer_to(target)
        self.net.deliver()
        for _ in range(max_ticks):
            cur = self.leader()
            if cur is not None and cur.id == target:
                return
            self.tick()
        cur = self.leader()
        if cur is not None and cur.role == LEADER and cur._transfer_target is not None:
            cur._transfer_target = None
        raise TransferTimeout(f"node {target} did not take leadership within {max_ticks} ticks")

    def run(self, ticks: int, faults=(), propose_every: int = 5) -> SimReport:
        schedule: dict[int, list] = {}
        for f in faults:
            schedule.setdefault(f["at"], []).append(f)
        start = self.net.now
        for t in range(1, ticks + 1):
            for f in schedule.get(start + t, ()):
                self.apply_fault(f)
            self.tick()
            if propose_every and t % propose_every == 0:
                self._proposals += 1
                self.propose(f"c{self._proposals}")
        return self.report(ticks)

    def apply_fault(self, f: dict):
        op = f["op"]
        if op == "crash":
            self.crash(f["node"])
        elif op == "restart":
            self.restart(f["node"])
        elif op == "partition":
            self.partition(f["groups"])
        elif op == "heal":
            self.heal()
        else:
            raise ValueError(f"unknown fault op {op!r}")

    def quiesce(self, ticks: int = 300):
        """Heal, restart everything, stop dropping and let the cluster converge."""
        self.heal()
        for i in list(self.net.crashed):
            self.restart(i)
        self.transport.drop = 0.0
        self.sink_drop = 0.0
        # one final entry in the surviving term forces full catch-up
        for _ in range(ticks):
            self.tick()
            if self.leader() is not None:
                break
        self.propose("final")
        self.tick(ticks)

    def check_convergence(self):
        """After ``quiesce``: every node applied the same sequence; listeners got all of it."""
        if not self.chosen:
            return
        top = max(self.chosen)
        expected = [self.chosen[i] for i in range(1, top + 1) if i in self.chosen]
        if len(expected) != top:
            self.violations.append("gap in committed indexes")
        for i in self.voter_ids + self.listener_ids:
            if self.applied[i] != expected[: len(self.applied[i])]:
                self.violations.append(f"node {i} applied sequence diverges")
            elif len(self.applied[i]) != top:
                self.violations.append(f"node {i} applied {len(self.applied[i])} of {top} entries")
        for i, got in self.received.items():
            first = []
            seen = set()
            for idx in got:
                if idx not in seen:
                    seen.add(idx)
                    first.append(idx)
            if first != list(range(1, len(first) + 1)):
                self.violations.append(f"listener {i} received entries out of order or with gaps")
            if len(first) != top:
                self.violations.append(f"listener {i} shipped {len(first)} of {top} entries")

    def report(self, ticks: int) -> SimReport:
        return SimReport(
            seed=self.seed,
            ticks=ticks,
            violations=list(self.violations),
            committed=len(self.chosen),
            leaders_by_term={t: sorted(v) for t, v in self.leaders_by_term.items()},
            listener_received={i: len(set(v)) for i, v in self.received.items()},
        )


def random_faults(seed: int, ticks: int, nodes: int, listeners: list) -> list[dict]:
    """A seeded schedule of crash/restart and partition/heal windows."""
    rng = random.Random(seed)
    faults = []
    t = rng.randint(50, 300)
    while t < ticks - 50:
        if rng.random() < 0.5:
            node = rng.randrange(nodes)
            faults.append({"at": t, "op": "crash", "node": node})
            faults.append({"at": min(ticks - 1, t + rng.randint(30, 400)), "op": "restart", "node": node})
        else:
            ids = list(range(nodes))
            rng.shuffle(ids)
            cut = rng.randint(1, nodes - 1)
            faults.append({"at": t, "op": "partition", "groups": [ids[:cut], ids[cut:]]})
            faults.append({"at": min(ticks - 1, t + rng.randint(30, 400)), "op": "heal"})
        t += rng.randint(300, 900)
    return faults


def run_scenario(scenario: dict) -> tuple[SimReport, list[dict]]:
    sim = RaftSim(
        voters=scenario.get("voters", 3),
        listeners=scenario.get("listeners", 0),
        seed=scenario.get("seed", 0),
        delay=tuple(scenario.get("delay", (1, 3))),
        drop=scenario.get("drop", 0.0),
        sink_drop=scenario.get("sink_drop", 0.0),
        trace=scenario.get("trace", True),
    )
    ticks = scenario.get("ticks", 1000)
    faults = scenario.get("faults")
    if faults == "random":
        faults = random_faults(sim.seed, ticks, len(sim.voter_ids) + len(sim.listener_ids), sim.listener_ids)
    sim.run(ticks, faults or (), scenario.get("propose_every", 5))
    sim.quiesce(scenario.get("quiesce_ticks", 300))
    sim.check_convergence()
    return sim.report(ticks), sim.trace


def load_scenario(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def write_trace(trace: list[dict], path: str):
    with open(path, "w") as f:
        for ev in trace:
            f.write(json.dumps(ev, default=str) + "\n")
