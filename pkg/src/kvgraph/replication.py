"""Cross-cluster synchronization through listeners and drainers.

Listeners are non-voting replicas added to the primary's meta group and to
every storage partition group.  Each one ships its committed log, entry by
entry, to a drainer.  The drainer buffers entries in its own WAL and
applies them to the secondary cluster as a client: meta commands through
the secondary's meta service, partition op batches through its storage
service (re-homed onto the secondary's partitions).

Sources are assigned to listener hosts round-robin and listener hosts to
drainers round-robin.  Shipping is at-least-once; applying is idempotent
through a per-source lsn watermark.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import GraphError, NodeDown, NotLeader, QuorumTimeout, Retryable, UnknownSpace, UnregisteredDrainer
from .kvstore import Disk, MemoryDisk, Partition
from .raft.listener import ListenerHandle, subscribe_listener

META = ("meta",)
_U64 = struct.Struct(">Q")
_UNAVAILABLE = (NotLeader, QuorumTimeout, Retryable, NodeDown)

# meta commands that describe the primary's own hosts or sessions, not shared state
_LOCAL_META_OPS = {"add_hosts", "remove_hosts", "begin_balance", "move_part", "end_balance",
                   "record_slow_query", "kill_query"}


@dataclass(frozen=True)
class ShipLogEntry:
    source: tuple  # META or ("data", space_id, part)
    lsn: int
    payload: Any


def source_name(source: tuple) -> str:
    return "meta" if source == META else f"data:{source[1]}:{source[2]}"


def _parse_source(name: str) -> tuple:
    if name == "meta":
        return META
    _, sid, part = name.split(":")
    return ("data", int(sid), int(part))


def _encode_payload(payload) -> bytes:
    if payload is None:
        return b"null"
    if isinstance(payload, dict):
        return json.dumps({"meta": payload}).encode()
    return json.dumps({"ops": [[op[0]] + [x.hex() for x in op[1:]] for op in payload]}).encode()


def _decode_payload(raw: bytes):
    d = json.loads(raw)
    if d is None:
        return None
    if "meta" in d:
        return d["meta"]
    return [tuple([op[0]] + [bytes.fromhex(x) for x in op[1:]]) for op in d["ops"]]


# ---------------------------------------------------------------------------
# drainer
# ---------------------------------------------------------------------------

class Drainer:
    """Stateful applier for one secondary cluster.

    The WAL-backed partition holds, per source, the applied watermark and
    every received-but-unapplied entry, so a crash loses nothing that was
    acknowledged.
    """

    def __init__(self, name: str, secondary, disk: Optional[Disk] = None, partition_num: Optional[int] = None):
        self.name = name
        self.secondary = secondary
        self.disk = disk or MemoryDisk()
        self.partition_num = partition_num  # override for spaces created on the secondary
        self.upstreams: set[str] = set()
        self.up = True
        self.applied_entries = 0
        self.gaps = 0
        self.drop_hook = None  # fault injection: entry -> True to discard it silently
        self._open()

    def _open(self):
        self.wal = Partition(0, self.disk, f"drainers/{self.name}")
        self.watermarks: dict[tuple, int] = {}
        self.buffer: dict[tuple, dict[int, Any]] = {}
        for k, v in self.wal.scan_prefix(b"w|"):
            self.watermarks[_parse_source(k[2:].decode())] = _U64.unpack(v)[0]
        for k, v in self.wal.scan_prefix(b"e|"):
            name, lsn = k[2:-9].decode(), _U64.unpack(k[-8:])[0]
            self.buffer.setdefault(_parse_source(name), {})[lsn] = _decode_payload(v)

    def register(self, primary_name: str):
        self.upstreams.add(primary_name)

    def crash(self):
        self.up = False
        self.watermarks = {}
        self.buffer = {}

    def restart(self):
        self._open()
        self.up = True

    # -- receiving -----------------------------------------------------------
    def watermark(self, source: tuple) -> int:
        return self.watermarks.get(source, 0)

    def _received(self, source: tuple) -> int:
        buf = self.buffer.get(source)
        return max([self.watermark(source)] + (list(buf) if buf else []))

    def receive(self, entry: ShipLogEntry) -> bool:
        """Durably buffer ``entry``; True is the acknowledgement."""
        if not self.up:
            return False
        last = self._received(entry.source)
        if entry.lsn <= last:
            return True  # redelivery
        if entry.lsn != last + 1:
            self.gaps += 1
            return False
        if self.drop_hook is not None and self.drop_hook(entry):
            payload = None  # acknowledged but never applied
        else:
            payload = entry.payload
        key = b"e|" + source_name(entry.source).encode() + b"|" + _U64.pack(entry.lsn)
        self.wal.put(key, _encode_payload(payload))
        self.buffer.setdefault(entry.source, {})[entry.lsn] = payload
        return True

    # -- applying ------------------------------------------------------------
    def drain_apply(self, max_entries: Optional[int] = None) -> dict:
        """Apply buffered entries in lsn order per source; returns the watermarks."""
        if not self.up:
            return dict(self.watermarks)
        n = 0
        sources = sorted(self.buffer, key=lambda s: (s != META, s))
        for src in sources:
            buf = self.buffer[src]
            while buf:
                lsn = self.watermark(src) + 1
                if lsn not in buf:
                    break
                outcome = self._apply(src, buf[lsn])
                if outcome == "defer":
                    break
                self.watermarks[src] = lsn
                del buf[lsn]
                self.wal.write_batch([
                    (1, b"w|" + source_name(src).encode(), _U64.pack(lsn)),
                    (2, b"e|" + source_name(src).encode() + b"|" + _U64.pack(lsn)),
                ])
                self.applied_entries += 1
                n += 1
                if max_entries is not None and n >= max_entries:
                    return dict(self.watermarks)
        return dict(self.watermarks)

    def pending(self) -> int:
        return sum(len(b) for b in self.buffer.values())

    def _apply(self, src: tuple, payload) -> str:
        """'ok' once applied (or deterministically rejected), 'defer' to retry later."""
        if payload is None:
            return "ok"
        sec = self.secondary
        try:
            with sec.lock:
                if src == META:
                    return self._apply_meta(payload)
                return self._apply_data(src[1], payload)
        except _UNAVAILABLE:
            return "defer"

    def _apply_meta(self, cmd: dict) -> str:
        if cmd["op"] in _LOCAL_META_OPS:
            return "ok"
        sec = self.secondary
        if cmd["op"] == "create_space":
            cmd = dict(cmd)
            if self.partition_num is not None:
                cmd["partition_num"] = self.partition_num
            cmd["replica_factor"] = max(1, min(cmd["replica_factor"], len(sec.meta.catalog.hosts)))
        try:
            sec.meta.propose(cmd)
        except _UNAVAILABLE:
            raise
        except GraphError:
            pass  # the primary rejected the same command the same way
        return "ok"

    def _apply_data(self, sid: int, ops: list) -> str:
        cat = self.secondary.meta.catalog
        try:
            sc = cat.space_by_id(sid)
        except UnknownSpace:
            # not created yet (meta lagging) or already dropped
            return "defer" if sid >= cat.next_space_id else "ok"
        for op in ops:
            if op[1][0] == 0x02:
                iid = int.from_bytes(op[1][5:9], "big")
                if iid >= sc.next_index_id:
                    return "defer"
        self.secondary.storage.apply_shipped(sid, ops, internal=True)
        return "ok"


# ---------------------------------------------------------------------------
# listeners
# ---------------------------------------------------------------------------

@dataclass
class _Lane:
    source: tuple
    host: str
    drainer: Drainer
    handle: ListenerHandle


@dataclass
class Replicator:
    """Listener side of one primary cluster shipping to one or more drainers."""

    primary: Any
    listener_hosts: list
    drainers: list
    disks: dict = field(default_factory=dict)
    lanes: dict = field(default_factory=dict)  # source -> _Lane
    host_drainer: dict = field(default_factory=dict)
    attached: bool = False

    def attach_listeners(self):
        if not self.listener_hosts:
            raise ValueError("at least one listener host is required")
        for d in self.drainers:
            if self.primary.config.name not in d.upstreams:
                raise UnregisteredDrainer(f"drainer {d.name!r} is not registered with {self.primary.config.name!r}")
        for i, h in enumerate(self.listener_hosts):
            self.host_drainer[h] = self.drainers[i % len(self.drainers)]
            self.disks.setdefault(h, MemoryDisk())
        self.attached = True
        self._attach_new()
        self.primary.meta.on_change(self._on_meta_change)

    def _on_meta_change(self, cmd, result):
        if cmd["op"] == "create_space":
            self._attach_new()

    def _sources(self) -> list[tuple[tuple, Any]]:
        st = self.primary.storage
        out = [(META, self.primary.meta_group)]
        for sid, part in sorted(st.groups):
            out.append((("data", sid, part), st.groups[(sid, part)]))
        return out

    def _attach_new(self):
        with self.primary.lock:
            for i, (src, group) in enumerate(self._sources()):
                if src in self.lanes:
                    continue
                host = self.listener_hosts[len(self.lanes) % len(self.listener_hosts)]
                drainer = self.host_drainer[host]
                node = group.add_listener(_listener_host(host))
                handle = subscribe_listener(node, self._sink(src, drainer), self.disks[host],
                                            f"{source_name(src)}")
                self.lanes[src] = _Lane(src, host, drainer, handle)

    @staticmethod
    def _sink(src: tuple, drainer: Drainer):
        return lambda idx, term, payload: drainer.receive(ShipLogEntry(src, idx, payload))

    def _group(self, src: tuple):
        if src == META:
            return self.primary.meta_group
        return self.primary.storage.groups.get((src[1], src[2]))

    def assignment(self) -> dict[str, list]:
        out: dict[str, list] = {h: [] for h in self.listener_hosts}
        for src, lane in self.lanes.items():
            out[lane.host].append(src)
        return out

    def pump(self, limit: Optional[int] = None) -> int:
        n = 0
        with self.primary.lock:
            for src, lane in sorted(self.lanes.items(), key=lambda kv: source_name(kv[0])):
                g = self._group(src)
                if g is None:
                    continue
                lh = _listener_host(lane.host)
                if not g.alive(lh):
                    continue
                lane.handle.rebind(g.nodes[lh])
                n += lane.handle.pump(limit)
        return n

    def backlog(self) -> int:
        total = 0
        for src, lane in self.lanes.items():
            g = self._group(src)
            if g is None:
                continue
            ld = g.leader()
            if ld is not None:
                total += max(0, ld.commit_index - lane.handle.shipped)
        return total

    # -- faults ----------------------------------------------------------
    def crash_listener(self, host: str):
        with self.primary.lock:
            for src, lane in self.lanes.items():
                g = self._group(src)
                if lane.host == host and g is not None:
                    g.crash(_listener_host(host))

    def restart_listener(self, host: str):
        with self.primary.lock:
            for src, lane in self.lanes.items():
                g = self._group(src)
                if lane.host == host and g is not None and not g.alive(_listener_host(host)):
                    node = g.restart(_listener_host(host))
                    # progress is reloaded from the listener's own WAL
                    lane.handle = subscribe_listener(node, self._sink(src, lane.drainer), self.disks[host],
                                                     source_name(src))


def _listener_host(host: str) -> str:
    return f"listener:{host}"


def attach_listeners(primary, drainers: list, listener_hosts: list) -> Replicator:
    r = Replicator(primary, list(listener_hosts), list(drainers))
    r.attach_listeners()
    return r


def sync(replicators: list, max_rounds: int = 10_000) -> int:
    """Pump, apply and tick until nothing is left in flight; returns rounds used."""
    drainers = {id(d): d for r in replicators for d in r.drainers}.values()
    for rounds in range(1, max_rounds + 1):
        moved = sum(r.pump() for r in replicators)
        for d in drainers:
            before = d.applied_entries
            d.drain_apply()
            moved += d.applied_entries - before
        if moved == 0 and all(r.backlog() == 0 for r in replicators) and all(d.pending() == 0 for d in drainers):
            return rounds
        if moved == 0:
            for r in replicators:
                r.primary.tick()
    return max_rounds


# ---------------------------------------------------------------------------
# convergence report
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    converged: bool
    catalog_equal: bool
    spaces: dict  # name -> {"equal": bool, "missing": [...], "extra": [...]}

    def diverging(self) -> list:
        return [(name, r) for name, r in self.spaces.items() if not r["equal"]]


def verify_convergence(primary, secondary, sample: int = 20) -> ConvergenceReport:
    """Compare catalogs and logical records of every space of ``primary``."""
    pc, sc = primary.meta.catalog, secondary.meta.catalog
    catalog_equal = pc.schema_digest() == sc.schema_digest()
    spaces = {}
    for name in sorted(pc.spaces):
        if name not in sc.spaces:
            spaces[name] = {"equal": False, "missing": ["<space>"], "extra": []}
            continue
        a = {json.dumps(r, default=str) for r in primary.storage.logical_records(name)}
        b = {json.dumps(r, default=str) for r in secondary.storage.logical_records(name)}
        missing = sorted(a - b)
        extra = sorted(b - a)
        spaces[name] = {
            "equal": not missing and not extra,
            "missing": [json.loads(x) for x in missing[:sample]],
            "extra": [json.loads(x) for x in extra[:sample]],
        }
    converged = catalog_equal and all(r["equal"] for r in spaces.values())
    return ConvergenceReport(converged, catalog_equal, spaces)
