"""Schema catalog, partition map and cluster administration.

``Catalog`` is a deterministic state machine driven by JSON-able command
dicts; ``MetaService`` replicates it through one Raft group so every
catalog change is committed before it is acknowledged.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Optional

from .codec import pad_vid
from .errors import (
    BalanceInProgress,
    DependentIndexExists,
    DuplicateName,
    HostNotEmpty,
    NotEnoughHosts,
    SemanticError,
    UnknownEdge,
    UnknownHost,
    UnknownIndex,
    UnknownProperty,
    UnknownQueryId,
    UnknownSpace,
    UnknownTag,
    UnknownUser,
    ValueTypeError,
)
from .schema import PropDef, Schema, SchemaDef, coerce_value

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1

ADMIN = "admin"
USER = "user"
HEARTBEAT_MISSES = 3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK
    return h


def hash_part(vid, partition_num: int, vid_len: int) -> int:
    """Static placement: ``fnv1a64(padded vid) mod partition_num + 1``."""
    return fnv1a64(pad_vid(vid, vid_len)) % partition_num + 1


@dataclass(frozen=True)
class SpaceDef:
    name: str
    id: int
    partition_num: int = 10
    replica_factor: int = 1
    vid_len: int = 16


@dataclass(frozen=True)
class IndexDef:
    name: str
    id: int
    schema: str
    is_edge: bool
    fields: tuple[str, ...]

    def to_json(self) -> dict:
        d = asdict(self)
        d["fields"] = list(self.fields)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "IndexDef":
        return cls(d["name"], d["id"], d["schema"], d["is_edge"], tuple(d["fields"]))


@dataclass
class SpaceCatalog:
    space: SpaceDef
    tags: dict[str, SchemaDef] = field(default_factory=dict)
    edges: dict[str, SchemaDef] = field(default_factory=dict)
    indexes: dict[str, IndexDef] = field(default_factory=dict)
    next_schema_id: int = 1
    next_index_id: int = 1

    # lookups used by storage and the query layer
    def schemas(self, is_edge: bool) -> dict[str, SchemaDef]:
        return self.edges if is_edge else self.tags

    def tag(self, name: str) -> SchemaDef:
        try:
            return self.tags[name]
        except KeyError:
            raise UnknownTag(f"tag {name!r} not found in space {self.space.name!r}") from None

    def edge(self, name: str) -> SchemaDef:
        try:
            return self.edges[name]
        except KeyError:
            raise UnknownEdge(f"edge type {name!r} not found in space {self.space.name!r}") from None

    def schema(self, name: str, is_edge: bool) -> SchemaDef:
        return self.edge(name) if is_edge else self.tag(name)

    def by_id(self, schema_id: int, is_edge: bool) -> SchemaDef:
        for s in self.schemas(is_edge).values():
            if s.id == schema_id:
                return s
        cls = UnknownEdge if is_edge else UnknownTag
        raise cls(f"schema id {schema_id} not found")

    def index(self, name: str) -> IndexDef:
        try:
            return self.indexes[name]
        except KeyError:
            raise UnknownIndex(f"index {name!r} not found") from None

    def index_by_id(self, index_id: int) -> IndexDef:
        for ix in self.indexes.values():
            if ix.id == index_id:
                return ix
        raise UnknownIndex(f"index id {index_id} not found")

    def indexes_on(self, schema: str, is_edge: bool) -> list[IndexDef]:
        return sorted(
            (ix for ix in self.indexes.values() if ix.schema == schema and ix.is_edge == is_edge),
            key=lambda ix: ix.id,
        )

    def to_json(self) -> dict:
        return {
            "space": asdict(self.space),
            "tags": [s.to_json() for s in self.tags.values()],
            "edges": [s.to_json() for s in self.edges.values()],
            "indexes": [ix.to_json() for ix in self.indexes.values()],
            "next_schema_id": self.next_schema_id,
            "next_index_id": self.next_index_id,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SpaceCatalog":
        sc = cls(SpaceDef(**d["space"]))
        sc.tags = {s["name"]: SchemaDef.from_json(s) for s in d["tags"]}
        sc.edges = {s["name"]: SchemaDef.from_json(s) for s in d["edges"]}
        sc.indexes = {ix["name"]: IndexDef.from_json(ix) for ix in d["indexes"]}
        sc.next_schema_id = d["next_schema_id"]
        sc.next_index_id = d["next_index_id"]
        return sc


def _props(raw: Iterable[dict]) -> tuple[PropDef, ...]:
    props = tuple(PropDef.from_json(p) for p in raw)
    names = [p.name for p in props]
    if len(set(names)) != len(names):
        raise DuplicateName(f"duplicate property names in {names}")
    for p in props:
        if p.default is not None:
            coerce_value(p.type, p.default)
    return props


class Catalog:
    """The replicated meta state.  ``apply`` must be deterministic."""

    def __init__(self):
        self.spaces: dict[str, SpaceCatalog] = {}
        self.parts: dict[int, dict[int, list[str]]] = {}
        self.hosts: list[str] = []
        self.users: dict[str, dict] = {"root": {"password": "root", "role": ADMIN}}
        self.slow_queries: list[dict] = []
        self.killed: set[str] = set()
        self.balance_active = False
        self.next_space_id = 1
        self.version = 0
        self._applied = 0

    # -- state machine protocol ------------------------------------------
    def applied_index(self) -> int:
        return self._applied

    def apply(self, index: int, cmd: Optional[dict]) -> Any:
        self._applied = index
        if cmd is None:
            return None
        handler = getattr(self, "_op_" + cmd["op"], None)
        if handler is None:
            raise SemanticError(f"unknown meta command {cmd['op']!r}")
        result = handler(**{k: v for k, v in cmd.items() if k != "op"})
        self.version += 1
        return result

    # -- reads -----------------------------------------------------------
    def space(self, name: str) -> SpaceCatalog:
        try:
            return self.spaces[name]
        except KeyError:
            raise UnknownSpace(f"space {name!r} not found") from None

    def space_by_id(self, space_id: int) -> SpaceCatalog:
        for sc in self.spaces.values():
            if sc.space.id == space_id:
                return sc
        raise UnknownSpace(f"space id {space_id} not found")

    def partition_for_vid(self, space: str, vid) -> int:
        sd = self.space(space).space
        return hash_part(vid, sd.partition_num, sd.vid_len)

    def part_hosts(self, space: str) -> dict[int, list[str]]:
        return self.parts[self.space(space).space.id]

    def host_load(self) -> dict[str, int]:
        load = {h: 0 for h in self.hosts}
        for parts in self.parts.values():
            for replicas in parts.values():
                for h in replicas:
                    load[h] = load.get(h, 0) + 1
        return load

    # -- spaces ----------------------------------------------------------
    def _op_create_space(self, name, partition_num=10, replica_factor=1, vid_len=16, if_not_exists=False):
        if name in self.spaces:
            if if_not_exists:
                return self.spaces[name].space.id
            raise DuplicateName(f"space {name!r} exists")
        if partition_num < 1 or replica_factor < 1 or vid_len < 1:
            raise SemanticError("partition_num, replica_factor and vid_len must be positive")
        if replica_factor > len(self.hosts):
            raise NotEnoughHosts(f"replica_factor {replica_factor} exceeds {len(self.hosts)} hosts")
        sid = self.next_space_id
        self.next_space_id += 1
        sd = SpaceDef(name, sid, partition_num, replica_factor, vid_len)
        self.spaces[name] = SpaceCatalog(sd)
        # round-robin: replica i of part p lands on host (p - 1 + i) mod n
        n = len(self.hosts)
        self.parts[sid] = {
            p: [self.hosts[(p - 1 + i) % n] for i in range(replica_factor)] for p in range(1, partition_num + 1)
        }
        return sid

    def _op_drop_space(self, name, if_exists=False):
        if name not in self.spaces:
            if if_exists:
                return None
            raise UnknownSpace(f"space {name!r} not found")
        sc = self.spaces.pop(name)
        self.parts.pop(sc.space.id, None)
        return sc.space.id

    # -- tags and edge types ---------------------------------------------
    def _op_create_schema(self, space, name, is_edge, props, if_not_exists=False):
        sc = self.space(space)
        if name in sc.tags or name in sc.edges:
            if if_not_exists:
                return sc.schema(name, is_edge).id if name in sc.schemas(is_edge) else None
            raise DuplicateName(f"{'edge' if is_edge else 'tag'} {name!r} exists")
        pdefs = _props(props)
        sid = sc.next_schema_id
        sc.next_schema_id += 1
        sc.schemas(is_edge)[name] = SchemaDef(name, sid, is_edge, [Schema(0, pdefs)])
        return sid

    def _op_alter_schema(self, space, name, is_edge, add=(), drop=(), change=()):
        sc = self.space(space)
        sdef = sc.schema(name, is_edge)
        indexed = {f for ix in sc.indexes_on(name, is_edge) for f in ix.fields}
        props = list(sdef.latest.props)
        for pname in drop:
            if pname in indexed:
                raise DependentIndexExists(f"property {pname!r} is indexed")
            if all(p.name != pname for p in props):
                raise UnknownProperty(f"property {pname!r} not found")
            props = [p for p in props if p.name != pname]
        for raw in change:
            new = _props([raw])[0]
            pos = [i for i, p in enumerate(props) if p.name == new.name]
            if not pos:
                raise UnknownProperty(f"property {new.name!r} not found")
            if new.name in indexed and (new.type != props[pos[0]].type or new.nullable):
                raise DependentIndexExists(f"property {new.name!r} is indexed")
            props[pos[0]] = new
        for p in _props(add):
            if any(q.name == p.name for q in props):
                raise DuplicateName(f"property {p.name!r} exists")
            props.append(p)
        _props([p.to_json() for p in props])
        v = sdef.latest.version + 1
        sdef.versions.append(Schema(v, tuple(props)))
        return v

    def _op_drop_schema(self, space, name, is_edge, if_exists=False):
        sc = self.space(space)
        if name not in sc.schemas(is_edge):
            if if_exists:
                return None
            sc.schema(name, is_edge)
        deps = sc.indexes_on(name, is_edge)
        if deps:
            raise DependentIndexExists(f"{name!r} has indexes {[ix.name for ix in deps]}")
        return sc.schemas(is_edge).pop(name).id

    # -- indexes ---------------------------------------------------------
    def _op_create_index(self, space, name, schema, is_edge, fields, if_not_exists=False):
        sc = self.space(space)
        if name in sc.indexes:
            if if_not_exists:
                return sc.indexes[name].id
            raise DuplicateName(f"index {name!r} exists")
        sdef = sc.schema(schema, is_edge)
        if not fields:
            raise SemanticError("an index needs at least one property")
        if len(set(fields)) != len(fields):
            raise DuplicateName(f"repeated property in index {name!r}")
        for f in fields:
            p = sdef.latest.prop(f)
            if p is None:
                raise UnknownProperty(f"property {f!r} not found on {schema!r}")
            if p.nullable:
                raise ValueTypeError(f"indexed property {f!r} must be NOT NULL")
        iid = sc.next_index_id
        sc.next_index_id += 1
        sc.indexes[name] = IndexDef(name, iid, schema, is_edge, tuple(fields))
        return iid

    def _op_drop_index(self, space, name, if_exists=False):
        sc = self.space(space)
        if name not in sc.indexes:
            if if_exists:
                return None
            raise UnknownIndex(f"index {name!r} not found")
        return sc.indexes.pop(name).id

    # -- hosts and balancing ---------------------------------------------
    def _op_add_hosts(self, hosts):
        added = [h for h in hosts if h not in self.hosts]
        self.hosts.extend(added)
        return added

    def _op_remove_hosts(self, hosts):
        for h in hosts:
            if h not in self.hosts:
                raise UnknownHost(f"host {h!r} not in the cluster")
        gone = set(hosts)
        moves = []
        for sid, parts in sorted(self.parts.items()):
            for p, replicas in sorted(parts.items()):
                if any(h in gone for h in replicas) and all(h in gone for h in replicas):
                    raise HostNotEmpty(f"space {sid} part {p} has no replica outside {sorted(gone)}")
        load = {h: c for h, c in self.host_load().items() if h not in gone}
        for sid, parts in sorted(self.parts.items()):
            for p, replicas in sorted(parts.items()):
                for h in [r for r in replicas if r in gone]:
                    cands = [c for c in sorted(load) if c not in replicas]
                    if not cands:
                        replicas.remove(h)
                        moves.append([sid, p, h, None])
                        continue
                    dst = min(cands, key=lambda c: (load[c], c))
                    replicas[replicas.index(h)] = dst
                    load[dst] += 1
                    moves.append([sid, p, h, dst])
        self.hosts = [h for h in self.hosts if h not in gone]
        return moves

    def _op_begin_balance(self):
        if self.balance_active:
            raise BalanceInProgress("a balance is already running")
        self.balance_active = True
        return self.plan_balance()

    def _op_move_part(self, space_id, part, src, dst):
        replicas = self.parts[space_id][part]
        if src not in replicas or dst in replicas:
            raise SemanticError(f"invalid move of {space_id}/{part} from {src} to {dst}")
        replicas[replicas.index(src)] = dst
        return replicas

    def _op_end_balance(self):
        self.balance_active = False

    def plan_balance(self) -> list[list]:
        """Greedy moves (space_id, part, src, dst) so host loads differ by at most one."""
        load = self.host_load()
        parts = copy.deepcopy(self.parts)
        moves = []
        if not load:
            return moves
        while True:
            hi = max(sorted(load), key=lambda h: load[h])
            lo = min(sorted(load), key=lambda h: load[h])
            if load[hi] - load[lo] <= 1:
                return moves
            found = None
            for sid in sorted(parts):
                for p in sorted(parts[sid]):
                    r = parts[sid][p]
                    if hi in r and lo not in r:
                        found = (sid, p)
                        break
                if found:
                    break
            if found is None:
                return moves
            sid, p = found
            r = parts[sid][p]
            r[r.index(hi)] = lo
            load[hi] -= 1
            load[lo] += 1
            moves.append([sid, p, hi, lo])

    # -- users -----------------------------------------------------------
    def _op_create_user(self, name, password, role=USER, if_not_exists=False):
        if name in self.users:
            if if_not_exists:
                return None
            raise DuplicateName(f"user {name!r} exists")
        self.users[name] = {"password": password, "role": role}

    def _op_drop_user(self, name, if_exists=False):
        if name not in self.users:
            if if_exists:
                return None
            raise UnknownUser(f"user {name!r} not found")
        del self.users[name]

    def _op_set_role(self, name, role):
        if name not in self.users:
            raise UnknownUser(f"user {name!r} not found")
        if role not in (ADMIN, USER):
            raise SemanticError(f"unknown role {role!r}")
        self.users[name]["role"] = role

    def _op_change_password(self, name, password):
        if name not in self.users:
            raise UnknownUser(f"user {name!r} not found")
        self.users[name]["password"] = password

    # -- slow queries and kills ------------------------------------------
    def _op_record_slow_query(self, entry):
        self.slow_queries.append(entry)
        return len(self.slow_queries)

    def _op_kill_query(self, qid):
        self.killed.add(qid)

    # -- dump / load -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "spaces": [sc.to_json() for sc in self.spaces.values()],
            "parts": {str(sid): {str(p): r for p, r in parts.items()} for sid, parts in self.parts.items()},
            "hosts": list(self.hosts),
            "users": self.users,
            "slow_queries": self.slow_queries,
            "killed": sorted(self.killed),
            "next_space_id": self.next_space_id,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "Catalog":
        c = cls()
        c.spaces = {s["space"]["name"]: SpaceCatalog.from_json(s) for s in d["spaces"]}
        c.parts = {int(sid): {int(p): list(r) for p, r in parts.items()} for sid, parts in d["parts"].items()}
        c.hosts = list(d["hosts"])
        c.users = copy.deepcopy(d["users"])
        c.slow_queries = list(d["slow_queries"])
        c.killed = set(d["killed"])
        c.next_space_id = d["next_space_id"]
        return c

    def schema_digest(self) -> dict:
        """Name-level view of every space's schemas and indexes (ids excluded)."""
        out = {}
        for name, sc in sorted(self.spaces.items()):
            out[name] = {
                "tags": {n: [p.to_json() for p in s.latest.props] for n, s in sorted(sc.tags.items())},
                "edges": {n: [p.to_json() for p in s.latest.props] for n, s in sorted(sc.edges.items())},
                "indexes": {
                    n: [ix.schema, ix.is_edge, list(ix.fields)] for n, ix in sorted(sc.indexes.items())
                },
            }
        return out


class MetaService:
    """Client-facing meta API over a replicated ``Catalog``.

    Mutations are proposed to the meta Raft group and return once
    committed and applied on the leader.  Reads are served from the
    leader's catalog; ``snapshot()`` hands out an immutable copy cached per
    catalog version.  Host heartbeats and the running-query registry are
    leader-local soft state.
    """

    def __init__(self, group, heartbeat_every: int = 10):
        self.group = group
        self.heartbeat_every = heartbeat_every
        self.last_beat: dict[str, int] = {}
        self.running: dict[str, dict] = {}
        self._snap: Optional[Catalog] = None
        self._snap_version = -1
        self._hooks: list[Callable[[dict, Any], None]] = []

    # -- plumbing --------------------------------------------------------
    def on_change(self, hook: Callable[[dict, Any], None]):
        """Call ``hook(cmd, result)`` after every committed mutation."""
        self._hooks.append(hook)

    def propose(self, cmd: dict) -> Any:
        result = self.group.propose(cmd)
        for h in self._hooks:
            h(cmd, result)
        return result

    @property
    def catalog(self) -> Catalog:
        return self.group.read_sm()

    def snapshot(self) -> Catalog:
        cat = self.catalog
        if self._snap is None or self._snap_version != cat.version:
            self._snap = Catalog.from_json(json.loads(cat.dumps()))
            self._snap.version = cat.version
            self._snap_version = cat.version
        return self._snap

    # -- spaces and schemas ----------------------------------------------
    def create_space(self, name, partition_num=10, replica_factor=1, vid_len=16, if_not_exists=False) -> int:
        return self.propose(
            {
                "op": "create_space",
                "name": name,
                "partition_num": partition_num,
                "replica_factor": replica_factor,
                "vid_len": vid_len,
                "if_not_exists": if_not_exists,
            }
        )

    def drop_space(self, name, if_exists=False):
        return self.propose({"op": "drop_space", "name": name, "if_exists": if_exists})

    def describe_space(self, name) -> SpaceDef:
        return self.catalog.space(name).space

    def create_tag(self, space, name, props: list[PropDef], if_not_exists=False) -> int:
        return self._create_schema(space, name, False, props, if_not_exists)

    def create_edge(self, space, name, props: list[PropDef], if_not_exists=False) -> int:
        return self._create_schema(space, name, True, props, if_not_exists)

    def _create_schema(self, space, name, is_edge, props, if_not_exists):
        return self.propose(
            {
                "op": "create_schema",
                "space": space,
                "name": name,
                "is_edge": is_edge,
                "props": [p.to_json() for p in props],
                "if_not_exists": if_not_exists,
            }
        )

    def alter_schema(self, space, name, is_edge, add=(), drop=(), change=()) -> int:
        return self.propose(
            {
                "op": "alter_schema",
                "space": space,
                "name": name,
                "is_edge": is_edge,
                "add": [p.to_json() for p in add],
                "drop": list(drop),
                "change": [p.to_json() for p in change],
            }
        )

    def drop_schema(self, space, name, is_edge, if_exists=False):
        return self.propose({"op": "drop_schema", "space": space, "name": name, "is_edge": is_edge, "if_exists": if_exists})

    def describe_schema(self, space, name, is_edge) -> Schema:
        return self.catalog.space(space).schema(name, is_edge).latest

    def create_index(self, space, name, schema, is_edge, fields, if_not_exists=False) -> int:
        return self.propose(
            {
                "op": "create_index",
                "space": space,
                "name": name,
                "schema": schema,
                "is_edge": is_edge,
                "fields": list(fields),
                "if_not_exists": if_not_exists,
            }
        )

    def drop_index(self, space, name, if_exists=False):
        return self.propose({"op": "drop_index", "space": space, "name": name, "if_exists": if_exists})

    def partition_for_vid(self, space, vid) -> int:
        return self.catalog.partition_for_vid(space, vid)

    # -- hosts -----------------------------------------------------------
    def add_hosts(self, hosts: list[str]) -> list[str]:
        return self.propose({"op": "add_hosts", "hosts": list(hosts)})

    def remove_hosts(self, hosts: list[str]) -> list[list]:
        return self.propose({"op": "remove_hosts", "hosts": list(hosts)})

    def heartbeat(self, host: str, now: int):
        self.last_beat[host] = now

    def online_hosts(self, now: int) -> list[str]:
        limit = HEARTBEAT_MISSES * self.heartbeat_every
        return [h for h in self.catalog.hosts if now - self.last_beat.get(h, -(10**9)) <= limit]

    def balance(self, execute_move: Callable[[int, int, str, str], None]) -> list[list]:
        """Plan and carry out partition moves; ``execute_move`` copies the data."""
        moves = self.propose({"op": "begin_balance"})
        try:
            for sid, part, src, dst in moves:
                execute_move(sid, part, src, dst)
                self.propose({"op": "move_part", "space_id": sid, "part": part, "src": src, "dst": dst})
        finally:
            self.propose({"op": "end_balance"})
        return moves

    # -- users -----------------------------------------------------------
    def create_user(self, name, password, role=USER, if_not_exists=False):
        return self.propose(
            {"op": "create_user", "name": name, "password": password, "role": role, "if_not_exists": if_not_exists}
        )

    def drop_user(self, name, if_exists=False):
        return self.propose({"op": "drop_user", "name": name, "if_exists": if_exists})

    def set_role(self, name, role):
        return self.propose({"op": "set_role", "name": name, "role": role})

    def change_password(self, name, password):
        return self.propose({"op": "change_password", "name": name, "password": password})

    def authenticate(self, name, password) -> Optional[str]:
        """Role of the user, or None when the credentials do not match."""
        u = self.catalog.users.get(name)
        if u is None or u["password"] != password:
            return None
        return u["role"]

    # -- slow queries and kills ------------------------------------------
    def record_slow_query(self, entry: dict) -> int:
        return self.propose({"op": "record_slow_query", "entry": entry})

    def list_slow_queries(self) -> list[dict]:
        return list(self.catalog.slow_queries)

    def register_query(self, qid: str, info: dict):
        self.running[qid] = info

    def finish_query(self, qid: str):
        self.running.pop(qid, None)

    def kill_query(self, qid: str):
        if qid not in self.running:
            raise UnknownQueryId(f"no running query {qid!r}")
        self.propose({"op": "kill_query", "qid": qid})

    def is_killed(self, qid: str) -> bool:
        return qid in self.catalog.killed

