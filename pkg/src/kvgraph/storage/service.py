"""Graph-level storage API over replicated kv partitions.

Every partition of a space is one Raft group.  Mutations are computed on
the partition leader (including the read-old/delete-old/write-new index
maintenance) and proposed as a single op batch, which gives per-partition
atomicity.  Edge writes span two partitions and go through the TOSS
roll-forward protocol:

1. the out-partition commits a lock ``(src, type, rank)`` holding the
   pending edge;
2. the in-partition commits the in-edge key;
3. the out-partition commits the out-edge key, its index entries and the
   lock deletion in one batch.

A lock left behind by a crash is re-driven by ``recover_toss`` whenever a
partition gets a new leader.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .. import codec
from ..codec import IN, OUT, PENDING_DELETE, PENDING_PUT, PendingEdge
from ..errors import (
    GraphError,
    NodeDown,
    NotLeader,
    QuorumTimeout,
    ReadOnlyCluster,
    Retryable,
    SemanticError,
    UnknownSpace,
)
from ..kvstore import OP_DELETE, OP_PUT, Disk, Partition
from ..meta import IndexDef, MetaService, SpaceCatalog, hash_part
from ..raft.group import ReplicatedGroup
from ..raft.network import RaftNetwork
from ..schema import PropertyType, SchemaDef, build_row, encode_json_value
from .replica import PartReplica

BOTH = "both"
SPIN_BACKOFF_CAP = 64
SPIN_BUDGET_TICKS = 256
PROPOSE_RETRIES = 5

Filter = Callable[[dict], bool]


@dataclass
class StorageStats:
    reads: int = 0
    writes: int = 0
    proposals: int = 0
    toss_started: int = 0
    toss_completed: int = 0
    toss_recovered: int = 0
    spins: int = 0


@dataclass
class _Ctx:
    """Per-call view of one space."""

    sc: SpaceCatalog

    @property
    def sid(self) -> int:
        return self.sc.space.id

    @property
    def vid_len(self) -> int:
        return self.sc.space.vid_len

    @property
    def nparts(self) -> int:
        return self.sc.space.partition_num

    def part_of(self, vid) -> int:
        return hash_part(vid, self.nparts, self.vid_len)


class StorageService:
    def __init__(
        self,
        network: RaftNetwork,
        meta: MetaService,
        disks: dict[str, Disk],
        kv_separation: bool = False,
        lock: Optional[threading.RLock] = None,
        rpc_delay: float = 0.0,
    ):
        self.network = network
        self.meta = meta
        self.disks = disks
        self.kv_separation = kv_separation
        self.lock = lock or threading.RLock()
        self.rpc_delay = rpc_delay
        self.groups: dict[tuple[int, int], ReplicatedGroup] = {}
        self.read_only = False
        self.stats = StorageStats()
        self.toss_fault: Optional[Callable[[str, dict], None]] = None
        self._recovered_term: dict[tuple[int, int], int] = {}

    # ------------------------------------------------------------------
    # partitions
    # ------------------------------------------------------------------
    def _make_sm(self, sid: int, part: int):
        def make(host):
            kv = Partition(part, self.disks[host], f"{sid}/{part}", self.kv_separation)
            return PartReplica(kv)

        return make

    def ensure_space(self, space: str):
        """Create the Raft groups of every partition of ``space`` (idempotent)."""
        with self.lock:
            cat = self.meta.catalog
            sc = cat.space(space)
            sid = sc.space.id
            for part, hosts in sorted(cat.parts[sid].items()):
                if (sid, part) in self.groups:
                    continue
                g = ReplicatedGroup(self.network, (sid, part), hosts, self._make_sm(sid, part))
                g.bootstrap()
                self.groups[(sid, part)] = g
                self._recovered_term[(sid, part)] = g.leader().term

    def drop_space_groups(self, sid: int):
        with self.lock:
            for key in [k for k in self.groups if k[0] == sid]:
                g = self.groups.pop(key)
                for h in g.hosts + g.listener_hosts:
                    self.network.remove(g.node_id(h))
                    if h in self.disks:
                        self.disks[h].remove_tree(f"{sid}/{key[1]}")
                self._recovered_term.pop(key, None)

    def group(self, sid: int, part: int) -> ReplicatedGroup:
        try:
            return self.groups[(sid, part)]
        except KeyError:
            raise UnknownSpace(f"space {sid} part {part} is not served") from None

    def _ctx(self, space: str) -> _Ctx:
        return _Ctx(self.meta.snapshot().space(space))

    def _reader(self, sid: int, part: int) -> Partition:
        g = self.group(sid, part)
        ld = g.leader()
        if ld is None:
            with self.lock:
                self._ensure_recovered(sid, part)
                ld = g.wait_leader()
        elif self._recovered_term.get((sid, part)) != ld.term:
            with self.lock:
                self._ensure_recovered(sid, part)
        self.stats.reads += 1
        return g.sms[ld.id[1]].kv

    def _writer(self, sid: int, part: int) -> Partition:
        """Leader partition for a read-modify-write; caller holds ``self.lock``."""
        self._ensure_recovered(sid, part)
        g = self.group(sid, part)
        return g.sms[g.wait_leader().id[1]].kv

    def _propose(self, sid: int, part: int, ops: list) -> None:
        """Replicate an idempotent op batch, retrying across leader changes."""
        g = self.group(sid, part)
        last: Optional[GraphError] = None
        for _ in range(PROPOSE_RETRIES):
            try:
                g.propose(ops)
                self.stats.proposals += 1
                self.stats.writes += len(ops)
                return
            except (NotLeader, QuorumTimeout) as e:
                last = e
                self.network.tick()
        raise Retryable(f"partition {part}: {last}")

    def _ensure_recovered(self, sid: int, part: int):
        g = self.group(sid, part)
        ld = g.wait_leader()
        if self._recovered_term.get((sid, part)) == ld.term:
            return
        self._recovered_term[(sid, part)] = ld.term
        self._recover_part(sid, part)

    def _check_writable(self, internal: bool):
        if self.read_only and not internal:
            raise ReadOnlyCluster("this cluster is a read-only secondary")

    def _rpc(self):
        if self.rpc_delay:
            time.sleep(self.rpc_delay)

    def crash_host(self, host: str):
        """Crash every replica on ``host`` (the kv data stays on its disk)."""
        with self.lock:
            for g in self.groups.values():
                if host in g.hosts:
                    g.crash(host)

    def restart_host(self, host: str):
        with self.lock:
            for g in self.groups.values():
                if host in g.hosts and not g.alive(host):
                    g.restart(host)

    def recover_all(self, space: Optional[str] = None) -> int:
        """Make sure every partition has a leader that has re-driven its locks."""
        n = 0
        with self.lock:
            for (sid, part) in sorted(self.groups):
                if space is not None and sid != self._ctx(space).sid:
                    continue
                before = self.stats.toss_recovered
                self._ensure_recovered(sid, part)
                n += self.stats.toss_recovered - before
        return n

    # ------------------------------------------------------------------
    # row and index helpers
    # ------------------------------------------------------------------
    @staticmethod
    def _decode(sdef: SchemaDef, raw: Optional[bytes]) -> Optional[dict]:
        if raw is None:
            return None
        return codec.deserialize_row(sdef.version, raw, sdef.latest)

    @staticmethod
    def _index_values(sdef: SchemaDef, ix: IndexDef, row: Optional[dict]) -> Optional[tuple[list, list]]:
        if row is None:
            return None
        vals = [row.get(f) for f in ix.fields]
        if any(v is None for v in vals):
            return None
        types = [sdef.latest.prop(f).type for f in ix.fields]
        return types, vals

    def _tag_index_keys(self, ctx: _Ctx, part: int, vid, sdef: SchemaDef, row: Optional[dict]) -> dict[int, bytes]:
        out = {}
        for ix in ctx.sc.indexes_on(sdef.name, False):
            tv = self._index_values(sdef, ix, row)
            if tv is not None:
                out[ix.id] = codec.encode_index_key(part, ix.id, tv[0], tv[1], vid, ctx.vid_len)
        return out

    def _edge_index_keys(
        self, ctx: _Ctx, part: int, src, rank: int, dst, sdef: SchemaDef, row: Optional[dict]
    ) -> dict[int, bytes]:
        out = {}
        for ix in ctx.sc.indexes_on(sdef.name, True):
            tv = self._index_values(sdef, ix, row)
            if tv is not None:
                out[ix.id] = codec.encode_edge_index_key(part, ix.id, tv[0], tv[1], src, rank, dst, ctx.vid_len)
        return out

    @staticmethod
    def _index_diff(old: dict[int, bytes], new: dict[int, bytes]) -> list:
        ops = []
        for iid, k in old.items():
            if new.get(iid) != k:
                ops.append((OP_DELETE, k))
        for iid, k in new.items():
            if old.get(iid) != k:
                ops.append((OP_PUT, k, b""))
        return ops

    # ------------------------------------------------------------------
    # vertices
    # ------------------------------------------------------------------
    def insert_vertex(self, space: str, vid, tags, ignore_existed_index: bool = False, if_not_exists: bool = False, internal: bool = False):
        self.insert_vertices(space, [(vid, tags)], ignore_existed_index, if_not_exists, internal)

    def insert_vertices(
        self,
        space: str,
        items: Iterable[tuple[Any, Any]],
        ignore_existed_index: bool = False,
        if_not_exists: bool = False,
        internal: bool = False,
    ) -> int:
        """Insert ``(vid, tags)`` items; ``tags`` maps tag name -> {prop: value}.

        Rows of one partition travel in one Raft payload.  With
        ``ignore_existed_index`` no index entry is read or written.
        """
        self._check_writable(internal)
        self._rpc()
        ctx = self._ctx(space)
        by_part: dict[int, list] = {}
        count = 0
        for vid, tags in items:
            tag_rows = list(tags.items()) if isinstance(tags, dict) else list(tags)
            encoded = []
            for tname, props in tag_rows:
                sdef = ctx.sc.tag(tname)
                latest = sdef.latest
                row = build_row(latest, list(props), list(props.values()))
                encoded.append((sdef, codec.serialize_row(latest, row), dict(zip(latest.names, row))))
            by_part.setdefault(ctx.part_of(vid), []).append((vid, encoded))
            count += 1
        with self.lock:
            for part in sorted(by_part):
                kv = self._writer(ctx.sid, part)
                overlay: dict[bytes, Optional[bytes]] = {}

                def read(k):
                    return overlay[k] if k in overlay else kv.get(k)

                ops = []
                for vid, encoded in by_part[part]:
                    vkey = codec.encode_vertex_key(part, vid, ctx.vid_len)
                    if if_not_exists and read(vkey) is not None:
                        continue
                    ops.append((OP_PUT, vkey, b""))
                    overlay[vkey] = b""
                    for sdef, raw, row in encoded:
                        tkey = codec.encode_tag_key(part, vid, sdef.id, ctx.vid_len)
                        if not ignore_existed_index:
                            old = self._decode(sdef, read(tkey))
                            ops += self._index_diff(
                                self._tag_index_keys(ctx, part, vid, sdef, old),
                                self._tag_index_keys(ctx, part, vid, sdef, row),
                            )
                        ops.append((OP_PUT, tkey, raw))
                        overlay[tkey] = raw
                if ops:
                    self._propose(ctx.sid, part, ops)
        return count

    def delete_tags(self, space: str, vid, tags: list[str], internal: bool = False):
        self._check_writable(internal)
        self._rpc()
        ctx = self._ctx(space)
        part = ctx.part_of(vid)
        with self.lock:
            kv = self._writer(ctx.sid, part)
            ops = []
            for tname in tags:
                sdef = ctx.sc.tag(tname)
                tkey = codec.encode_tag_key(part, vid, sdef.id, ctx.vid_len)
                old = self._decode(sdef, kv.get(tkey))
                if old is None:
                    continue
                ops += [(OP_DELETE, k) for k in self._tag_index_keys(ctx, part, vid, sdef, old).values()]
                ops.append((OP_DELETE, tkey))
            if ops:
                self._propose(ctx.sid, part, ops)

    def delete_vertex(self, space: str, vid, with_edge: bool = False, internal: bool = False):
        """Remove the vertex marker, its tag rows and their index entries.

        Incident edges are left alone unless ``with_edge`` is set, in which
        case each one is deleted through the edge protocol (both keys).
        """
        self._check_writable(internal)
        self._rpc()
        ctx = self._ctx(space)
        part = ctx.part_of(vid)
        with self.lock:
            if with_edge:
                kv = self._writer(ctx.sid, part)
                edges = []
                for k, _ in kv.scan_prefix(codec.edge_prefix(part, vid, OUT, None, ctx.vid_len), values=False):
                    ek = codec.decode_data_key(k, ctx.vid_len)
                    edges.append((ek.src, ek.edge_type, ek.rank, ek.dst))
                for k, _ in kv.scan_prefix(codec.edge_prefix(part, vid, IN, None, ctx.vid_len), values=False):
                    ek = codec.decode_data_key(k, ctx.vid_len)
                    edges.append((ek.src, ek.edge_type, ek.rank, ek.dst))
                for src, etype, rank, dst in edges:
                    self._toss(ctx, PENDING_DELETE, src, etype, rank, dst, b"", False)
            kv = self._writer(ctx.sid, part)
            ops = []
            for k, v in kv.scan_prefix(codec.tag_prefix(part, vid, ctx.vid_len)):
                tk = codec.decode_data_key(k, ctx.vid_len)
                try:
                    sdef = ctx.sc.by_id(tk.tag_id, False)
                except GraphError:
                    sdef = None
                if sdef is not None:
                    row = self._decode(sdef, v)
                    ops += [(OP_DELETE, ik) for ik in self._tag_index_keys(ctx, part, vid, sdef, row).values()]
                ops.append((OP_DELETE, k))
            vkey = codec.encode_vertex_key(part, vid, ctx.vid_len)
            if kv.contains(vkey):
                ops.append((OP_DELETE, vkey))
            if ops:
                self._propose(ctx.sid, part, ops)

    # ------------------------------------------------------------------
    # edges (TOSS)
    # ------------------------------------------------------------------
    def insert_edge(
        self,
        space: str,
        src,
        edge: str,
        rank: int,
        dst,
        props: Optional[dict] = None,
        if_not_exists: bool = False,
        internal: bool = False,
    ) -> bool:
        """Atomically write the out/in key pair.  Returns False when skipped by IF NOT EXISTS."""
        self._check_writable(internal)
        self._rpc()
        ctx = self._ctx(space)
        sdef = ctx.sc.edge(edge)
        props = props or {}
        row = build_row(sdef.latest, list(props), list(props.values()))
        raw = codec.serialize_row(sdef.latest, row)
        with self.lock:
            return self._toss(ctx, PENDING_PUT, src, sdef.id, rank, dst, raw, if_not_exists)

    def insert_edges(self, space: str, edges: Iterable[tuple], if_not_exists: bool = False, internal: bool = False) -> int:
        n = 0
        for src, edge, rank, dst, props in edges:
            n += bool(self.insert_edge(space, src, edge, rank, dst, props, if_not_exists, internal))
        return n

    def delete_edge(self, space: str, src, edge: str, rank: int, dst, internal: bool = False):
        self._check_writable(internal)
        self._rpc()
        ctx = self._ctx(space)
        sdef = ctx.sc.edge(edge)
        with self.lock:
            self._toss(ctx, PENDING_DELETE, src, sdef.id, rank, dst, b"", False)

    def _fault(self, step: str, info: dict):
        if self.toss_fault is not None:
            self.toss_fault(step, info)

    def _toss(self, ctx: _Ctx, op: int, src, etype: int, rank: int, dst, raw: bytes, if_not_exists: bool) -> bool:
        out_part = ctx.part_of(src)
        in_part = ctx.part_of(dst)
        out_key = codec.encode_edge_key(out_part, src, OUT, etype, rank, dst, ctx.vid_len)
        lock_key = codec.encode_lock_key(out_part, src, etype, rank, ctx.vid_len)
        kv = self._spin(ctx, out_part, lock_key)
        if if_not_exists and op == PENDING_PUT and kv.contains(out_key):
            return False
        pending = PendingEdge(op, src, dst, etype, rank, raw)
        self.stats.toss_started += 1
        self._propose(ctx.sid, out_part, [(OP_PUT, lock_key, codec.encode_pending(pending, ctx.vid_len))])
        info = {"space_id": ctx.sid, "out_part": out_part, "in_part": in_part, "src": src, "dst": dst}
        self._fault("locked", info)
        self._forward(ctx, pending)
        self.stats.toss_completed += 1
        return True

    def _spin(self, ctx: _Ctx, part: int, lock_key: bytes) -> Partition:
        """Wait (in ticks, with capped exponential backoff) until ``lock_key`` clears."""
        waited = 0
        backoff = 1
        while True:
            kv = self._writer(ctx.sid, part)
            if not kv.contains(lock_key):
                return kv
            if waited >= SPIN_BUDGET_TICKS:
                raise Retryable("edge is locked by an unfinished write")
            self.stats.spins += 1
            self.network.tick(backoff)
            waited += backoff
            backoff = min(backoff * 2, SPIN_BACKOFF_CAP)

    def _forward(self, ctx: _Ctx, p: PendingEdge):
        """Steps 2 and 3: write the in-edge, then the out-edge and drop the lock."""
        out_part = ctx.part_of(p.src)
        in_part = ctx.part_of(p.dst)
        in_key = codec.encode_edge_key(in_part, p.dst, IN, p.edge_type, p.rank, p.src, ctx.vid_len)
        out_key = codec.encode_edge_key(out_part, p.src, OUT, p.edge_type, p.rank, p.dst, ctx.vid_len)
        lock_key = codec.encode_lock_key(out_part, p.src, p.edge_type, p.rank, ctx.vid_len)
        if p.op == PENDING_PUT:
            self._propose(ctx.sid, in_part, [(OP_PUT, in_key, p.value)])
        else:
            self._propose(ctx.sid, in_part, [(OP_DELETE, in_key)])
        self._fault("in_written", {"space_id": ctx.sid, "out_part": out_part, "in_part": in_part, "src": p.src, "dst": p.dst})
        kv = self._writer(ctx.sid, out_part)
        try:
            sdef = ctx.sc.by_id(p.edge_type, True)
        except GraphError:
            sdef = None
        ops = []
        if sdef is not None:
            old = self._decode(sdef, kv.get(out_key))
            new = self._decode(sdef, p.value) if p.op == PENDING_PUT else None
            ops += self._index_diff(
                self._edge_index_keys(ctx, out_part, p.src, p.rank, p.dst, sdef, old),
                self._edge_index_keys(ctx, out_part, p.src, p.rank, p.dst, sdef, new),
            )
        ops.append((OP_PUT, out_key, p.value) if p.op == PENDING_PUT else (OP_DELETE, out_key))
        ops.append((OP_DELETE, lock_key))
        self._propose(ctx.sid, out_part, ops)

    def recover_toss(self, space: str, part: int) -> int:
        """Roll forward every lock on ``part``; returns how many were completed."""
        ctx = self._ctx(space)
        with self.lock:
            self.group(ctx.sid, part).wait_leader()
            return self._recover_part(ctx.sid, part, ctx)

    def _recover_part(self, sid: int, part: int, ctx: Optional[_Ctx] = None) -> int:
        if ctx is None:
            ctx = _Ctx(self.meta.snapshot().space_by_id(sid))
        g = self.group(sid, part)
        kv = g.sms[g.wait_leader().id[1]].kv
        locks = kv.scan_prefix(codec.lock_prefix(part))
        for _, v in locks:
            self._forward(ctx, codec.decode_pending(v, ctx.vid_len))
            self.stats.toss_recovered += 1
        return len(locks)

    def lock_count(self, space: str) -> int:
        ctx = self._ctx(space)
        return sum(len(self._reader(ctx.sid, p).scan_prefix(codec.lock_prefix(p), values=False)) for p in range(1, ctx.nparts + 1))

    # ------------------------------------------------------------------
    # bulk edges (no lock; the caller guarantees no concurrent writers)
    # ------------------------------------------------------------------
    def bulk_insert_edges(self, space: str, edges: Iterable[tuple], ignore_existed_index: bool = True, internal: bool = False) -> int:
        """Write out/in key pairs grouped per partition, one payload each."""
        self._check_writable(internal)
        ctx = self._ctx(space)
        by_part: dict[int, list] = {}
        # out_key -> (part, src, rank, dst, sdef, row) of the last write, for index upkeep
        latest: dict[bytes, tuple] = {}
        n = 0
        for src, edge, rank, dst, props in edges:
            sdef = ctx.sc.edge(edge)
            props = props or {}
            row = build_row(sdef.latest, list(props), list(props.values()))
            raw = codec.serialize_row(sdef.latest, row)
            op_ = ctx.part_of(src)
            ip = ctx.part_of(dst)
            out_key = codec.encode_edge_key(op_, src, OUT, sdef.id, rank, dst, ctx.vid_len)
            by_part.setdefault(ip, []).append((OP_PUT, codec.encode_edge_key(ip, dst, IN, sdef.id, rank, src, ctx.vid_len), raw))
            by_part.setdefault(op_, []).append((OP_PUT, out_key, raw))
            if not ignore_existed_index:
                latest[out_key] = (op_, src, rank, dst, sdef, dict(zip(sdef.latest.names, row)))
            n += 1
        with self.lock:
            for out_key, (part, src, rank, dst, sdef, row) in latest.items():
                old = self._decode(sdef, self._writer(ctx.sid, part).get(out_key))
                by_part[part] += self._index_diff(
                    self._edge_index_keys(ctx, part, src, rank, dst, sdef, old),
                    self._edge_index_keys(ctx, part, src, rank, dst, sdef, row),
                )
            for part in sorted(by_part):
                self._writer(ctx.sid, part)
                self._propose(ctx.sid, part, by_part[part])
        return n

    # ------------------------------------------------------------------
    # reads
    # ------------------------------------------------------------------
    def get_neighbors(
        self,
        space: str,
        vids: Iterable,
        direction: str = OUT,
        edges: Optional[list[str]] = None,
        props: bool = True,
        filter: Optional[Filter] = None,
        limit: Optional[int] = None,
    ) -> list[dict]:
        """One dict per traversed edge, in input-vid order then key order.

        Row keys: ``vid`` (the expanded vertex), ``other`` (the neighbor),
        ``src``/``dst`` (the edge's true endpoints), ``edge``, ``rank``,
        ``direction`` and ``props`` (None when ``props`` is False).
        ``filter`` and ``limit`` are evaluated here, before rows leave the
        storage layer.
        """
        self._rpc()
        ctx = self._ctx(space)
        dirs = [OUT, IN] if direction == BOTH else [direction]
        if edges is None:
            sdefs = None
        else:
            sdefs = [ctx.sc.edge(e) for e in edges]
        need_values = props or filter is not None
        names = {s.id: s for s in ctx.sc.edges.values()}
        out: list[dict] = []
        for vid in vids:
            part = ctx.part_of(vid)
            kv = self._reader(ctx.sid, part)
            for d in dirs:
                prefixes = (
                    [codec.edge_prefix(part, vid, d, None, ctx.vid_len)]
                    if sdefs is None
                    else [codec.edge_prefix(part, vid, d, s.id, ctx.vid_len) for s in sorted(sdefs, key=lambda s: s.id)]
                )
                for prefix in prefixes:
                    for k, v in kv.scan_prefix(prefix, values=need_values):
                        ek = codec.decode_data_key(k, ctx.vid_len)
                        sdef = names.get(ek.edge_type)
                        if sdef is None:
                            continue
                        row = {
                            "vid": ek.vid,
                            "other": ek.other,
                            "src": ek.src,
                            "dst": ek.dst,
                            "edge": sdef.name,
                            "rank": ek.rank,
                            "direction": d,
                            "props": self._decode(sdef, v) if need_values else None,
                        }
                        if filter is not None and not filter(row):
                            continue
                        out.append(row)
                        if limit is not None and len(out) >= limit:
                            return out
        return out

    def get_vertex_props(self, space: str, vids: Iterable, tags: Optional[list[str]] = None) -> list[dict]:
        """``{"vid", "tags": {tag: {prop: value}}}`` per existing vertex; absent vids yield nothing.

        With ``tags`` given, vertices carrying none of them are skipped.
        """
        self._rpc()
        ctx = self._ctx(space)
        wanted = None if tags is None else [ctx.sc.tag(t) for t in tags]
        out = []
        for vid in vids:
            part = ctx.part_of(vid)
            kv = self._reader(ctx.sid, part)
            got = {}
            if wanted is None:
                if kv.get(codec.encode_vertex_key(part, vid, ctx.vid_len)) is None:
                    continue
                for k, v in kv.scan_prefix(codec.tag_prefix(part, vid, ctx.vid_len)):
                    tk = codec.decode_data_key(k, ctx.vid_len)
                    try:
                        sdef = ctx.sc.by_id(tk.tag_id, False)
                    except GraphError:
                        continue
                    got[sdef.name] = self._decode(sdef, v)
            else:
                for sdef in wanted:
                    raw = kv.get(codec.encode_tag_key(part, vid, sdef.id, ctx.vid_len))
                    if raw is not None:
                        got[sdef.name] = self._decode(sdef, raw)
                if not got:
                    continue
            out.append({"vid": vid, "tags": got})
        return out

    def get_edge_props(self, space: str, refs: Iterable[tuple], edge: str) -> list[dict]:
        """Point lookups of ``(src, rank, dst)`` out-edges of type ``edge``."""
        self._rpc()
        ctx = self._ctx(space)
        sdef = ctx.sc.edge(edge)
        out = []
        for src, rank, dst in refs:
            part = ctx.part_of(src)
            raw = self._reader(ctx.sid, part).get(codec.encode_edge_key(part, src, OUT, sdef.id, rank, dst, ctx.vid_len))
            if raw is not None:
                out.append({"src": src, "dst": dst, "rank": rank, "edge": edge, "props": self._decode(sdef, raw)})
        return out

    def full_scan(self, space: str, schema: str, is_edge: bool) -> list[dict]:
        """Every vertex carrying tag ``schema`` (or every edge of that type), via data keys."""
        self._rpc()
        ctx = self._ctx(space)
        sdef = ctx.sc.schema(schema, is_edge)
        out = []
        want = codec.REC_OUT if is_edge else codec.REC_TAG
        pos = 5 + ctx.vid_len
        for part in range(1, ctx.nparts + 1):
            kv = self._reader(ctx.sid, part)
            for k, v in kv.scan_prefix(codec.data_prefix(part)):
                if k[pos] != want:
                    continue
                dk = codec.decode_data_key(k, ctx.vid_len)
                if is_edge:
                    if dk.edge_type == sdef.id:
                        out.append({"src": dk.src, "dst": dk.dst, "rank": dk.rank, "edge": schema, "props": self._decode(sdef, v)})
                elif dk.tag_id == sdef.id:
                    out.append({"vid": dk.vid, "tag": schema, "props": self._decode(sdef, v)})
        return out

    def index_scan(
        self,
        space: str,
        index: str,
        eq: Iterable = (),
        range_: Optional[tuple] = None,
    ) -> list:
        """Vids (or ``(src, rank, dst)`` for edge indexes) matching the scan spec.

        ``eq`` gives equality values for the leading index properties;
        ``range_ = (lo, lo_inclusive, hi, hi_inclusive)`` bounds the next one
        (either end may be None).  The byte range is conservative for
        variable-width strings, so candidates are re-checked on the decoded
        index key.  Data rows are never read.
        """
        self._rpc()
        ctx = self._ctx(space)
        ix = ctx.sc.index(index)
        sdef = ctx.sc.schema(ix.schema, ix.is_edge)
        types = [sdef.latest.prop(f).type for f in ix.fields]
        eq = list(eq)
        if len(eq) > len(types) or (range_ is not None and len(eq) >= len(types)):
            raise SemanticError("index scan spec longer than the index")
        eq_bin = b"".join(codec.encode_index_value(t, v) for t, v in zip(types, eq))
        lo_bin = hi_bin = None
        if range_ is not None:
            lo, _, hi, _ = range_
            rt = types[len(eq)]
            if lo is not None:
                lo_bin = codec.encode_index_value(rt, lo)
            if hi is not None:
                hi_bin = codec.encode_index_value(rt, hi)
        out = []
        for part in range(1, ctx.nparts + 1):
            base = codec.index_prefix(part, ix.id) + eq_bin
            start = base + lo_bin if lo_bin is not None else base
            end = codec.prefix_end(base)
            if hi_bin is not None and types[len(eq)] is not PropertyType.STRING:
                # a string shorter than the bound is followed by arbitrary bytes (the next
                # field or the length segment), so only fixed-width bounds can cap the scan
                end = codec.prefix_end(base + hi_bin)
            kv = self._reader(ctx.sid, part)
            for k, _ in kv.scan_range(start, end, values=False):
                dk = codec.decode_index_key(k, types, ctx.vid_len, ix.is_edge)
                if not _matches(dk.values, eq, range_):
                    continue
                out.append((dk.src, dk.rank, dk.dst) if ix.is_edge else dk.vid)
        return out

    def index_entries(self, space: str, index: str) -> list[bytes]:
        """Raw index keys of ``index`` across partitions, in key order."""
        ctx = self._ctx(space)
        ix = ctx.sc.index(index)
        keys = []
        for part in range(1, ctx.nparts + 1):
            keys += [k for k, _ in self._reader(ctx.sid, part).scan_prefix(codec.index_prefix(part, ix.id), values=False)]
        return keys

    def rebuild_index(self, space: str, index: str, internal: bool = False) -> dict:
        """Drop the index range and rewrite it from a sequential data scan, per partition."""
        self._check_writable(internal)
        ctx = self._ctx(space)
        ix = ctx.sc.index(index)
        sdef = ctx.sc.schema(ix.schema, ix.is_edge)
        want = codec.REC_OUT if ix.is_edge else codec.REC_TAG
        pos = 5 + ctx.vid_len
        entries = 0
        with self.lock:
            for part in range(1, ctx.nparts + 1):
                kv = self._writer(ctx.sid, part)
                ops = [(OP_DELETE, k) for k, _ in kv.scan_prefix(codec.index_prefix(part, ix.id), values=False)]
                new_keys = []
                for k, v in kv.scan_prefix(codec.data_prefix(part)):
                    if k[pos] != want:
                        continue
                    dk = codec.decode_data_key(k, ctx.vid_len)
                    if (dk.edge_type if ix.is_edge else dk.tag_id) != sdef.id:
                        continue
                    tv = self._index_values(sdef, ix, self._decode(sdef, v))
                    if tv is None:
                        continue
                    if ix.is_edge:
                        new_keys.append(codec.encode_edge_index_key(part, ix.id, tv[0], tv[1], dk.src, dk.rank, dk.dst, ctx.vid_len))
                    else:
                        new_keys.append(codec.encode_index_key(part, ix.id, tv[0], tv[1], dk.vid, ctx.vid_len))
                keep = set(new_keys)
                ops = [op for op in ops if op[1] not in keep] + [(OP_PUT, k, b"") for k in new_keys]
                entries += len(new_keys)
                if ops:
                    self._propose(ctx.sid, part, ops)
        return {"index": index, "entries": entries, "parts": ctx.nparts}

    def scan_vertex(self, space: str, vid) -> list[tuple[bytes, bytes]]:
        """Raw records under one vertex prefix: marker, tags, out-edges, in-edges."""
        ctx = self._ctx(space)
        part = ctx.part_of(vid)
        return self._reader(ctx.sid, part).scan_prefix(codec.vertex_prefix(part, vid, ctx.vid_len))

    # ------------------------------------------------------------------
    # shipped batches (cross-cluster replication)
    # ------------------------------------------------------------------
    @staticmethod
    def _owner(sc: SpaceCatalog, key: bytes) -> Optional[str]:
        """Vid whose partition holds ``key``; None for keys that are not re-homed."""
        vl = sc.space.vid_len
        kind = key[0]
        if kind in (codec.KIND_DATA, codec.KIND_LOCK):
            return codec.unpad_vid(key[5 : 5 + vl])
        if kind == codec.KIND_INDEX:
            iid = int.from_bytes(key[5:9], "big")
            try:
                ix = sc.index_by_id(iid)
            except GraphError:
                return None
            tail = 2 * vl + 8 if ix.is_edge else vl
            return codec.unpad_vid(key[len(key) - tail : len(key) - tail + vl])
        return None

    def apply_shipped(self, sid: int, ops: list, internal: bool = False) -> int:
        """Apply another cluster's partition op batch, re-homing every key by its owner vid.

        Keys keep their bytes except the partition field, so the two clusters
        may use different partition counts as long as ``vid_len`` matches.
        """
        self._check_writable(internal)
        ctx = _Ctx(self.meta.snapshot().space_by_id(sid))
        by_part: dict[int, list] = {}
        for op in ops:
            key = op[1]
            owner = self._owner(ctx.sc, key)
            if owner is None:
                continue
            part = ctx.part_of(owner)
            by_part.setdefault(part, []).append((op[0], key[:1] + part.to_bytes(4, "big") + key[5:], *op[2:]))
        with self.lock:
            for part in sorted(by_part):
                self._propose(ctx.sid, part, by_part[part])
        return sum(len(v) for v in by_part.values())

    # ------------------------------------------------------------------
    # state digests
    # ------------------------------------------------------------------
    def logical_records(self, space: str, include_index: bool = True) -> list:
        """Canonical, id-free records of a space (independent of partition count)."""
        ctx = self._ctx(space)
        sc = ctx.sc
        tag_names = {s.id: s for s in sc.tags.values()}
        edge_names = {s.id: s for s in sc.edges.values()}
        ix_by_id = {ix.id: ix for ix in sc.indexes.values()}
        recs = []
        for part in range(1, ctx.nparts + 1):
            for k, v in self._reader(ctx.sid, part).scan_prefix(b""):
                kind = k[0]
                if kind == codec.KIND_DATA:
                    dk = codec.decode_data_key(k, ctx.vid_len)
                    if isinstance(dk, codec.VertexKey):
                        recs.append(["v", dk.vid])
                    elif isinstance(dk, codec.TagKey):
                        s = tag_names.get(dk.tag_id)
                        recs.append(["t", dk.vid, s.name if s else dk.tag_id, _canon(self._decode(s, v)) if s else v.hex()])
                    else:
                        s = edge_names.get(dk.edge_type)
                        recs.append(
                            ["e", dk.direction, dk.src, s.name if s else dk.edge_type, dk.rank, dk.dst, _canon(self._decode(s, v)) if s else v.hex()]
                        )
                elif kind == codec.KIND_INDEX and include_index:
                    iid = int.from_bytes(k[5:9], "big")
                    ix = ix_by_id.get(iid)
                    if ix is None:
                        recs.append(["i?", k.hex()])
                        continue
                    sdef = sc.schema(ix.schema, ix.is_edge)
                    types = [sdef.latest.prop(f).type for f in ix.fields]
                    dk = codec.decode_index_key(k, types, ctx.vid_len, ix.is_edge)
                    recs.append(["i", ix.name, _canon(list(dk.values)), dk.vid, dk.src, dk.rank, dk.dst])
                elif kind == codec.KIND_LOCK:
                    recs.append(["l", k.hex()])
        recs.sort(key=lambda r: json.dumps(r, default=str))
        return recs

    def state_hash(self, space: str, include_index: bool = True) -> str:
        h = hashlib.sha256()
        for r in self.logical_records(space, include_index):
            h.update(json.dumps(r, default=str).encode())
            h.update(b"\n")
        return h.hexdigest()

    def raw_state_hash(self, space: str) -> str:
        """Hash of the exact bytes of every leader partition (system keys excluded)."""
        ctx = self._ctx(space)
        h = hashlib.sha256()
        for part in range(1, ctx.nparts + 1):
            for k, v in self._reader(ctx.sid, part).scan_prefix(b""):
                if k[0] == codec.KIND_SYSTEM:
                    continue
                h.update(len(k).to_bytes(4, "big") + k + len(v).to_bytes(4, "big") + v)
        return h.hexdigest()


def _canon(v):
    if isinstance(v, dict):
        return {k: _canon(x) for k, x in sorted(v.items())}
    if isinstance(v, list):
        return [_canon(x) for x in v]
    return encode_json_value(v)


def _matches(values: tuple, eq: list, range_: Optional[tuple]) -> bool:
    for a, b in zip(values, eq):
        if a != b:
            return False
    if range_ is None:
        return True
    lo, lo_inc, hi, hi_inc = range_
    x = values[len(eq)]
    if lo is not None and (x < lo or (x == lo and not lo_inc)):
        return False
    if hi is not None and (x > hi or (x == hi and not hi_inc)):
        return False
    return True
