"""The graph service: sessions, permissions and the statement pipeline.

text -> parse -> validate -> plan -> optimize -> execute.  DDL and admin
statements plan to a single node whose executor calls back into
``GraphService._admin``.
"""

from __future__ import annotations

import itertools
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from ..errors import (
    AuthFailed,
    PermissionDenied,
    ReadOnlyCluster,
    SemanticError,
    UnknownQueryId,
    UnknownSession,
)
from ..meta import ADMIN, USER
from ..schema import PropDef, PropertyType, coerce_value
from . import ast as A
from .executor import DataSet, ExecContext, execute
from .expr import eval_const
from .optimizer import optimize
from .parser import parse
from .plan import PlanNode, render
from .planner import plan
from .validator import DQL, validate

# statements any authenticated user may run
_USER_OK = (A.Use, A.Show, A.Describe, A.Pipe) + DQL + A.MUTATIONS

_ROLE_NAMES = {"ADMIN": ADMIN, "GOD": ADMIN, "DBA": ADMIN, "USER": USER, "GUEST": USER}


@dataclass
class Session:
    id: int
    user: str
    role: str
    space: Optional[str] = None


@dataclass
class ResultSet:
    columns: list
    rows: list = field(default_factory=list)
    space: Optional[str] = None
    latency_us: int = 0
    plan: Optional[str] = None  # EXPLAIN / PROFILE table
    qid: Optional[str] = None

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


class GraphService:
    def __init__(self, cluster, optimize_plans: bool = True):
        self.c = cluster
        self.optimize_plans = optimize_plans
        self.sessions: dict[int, Session] = {}
        self._ids = itertools.count(1)
        self._qids = itertools.count(1)
        self._mu = threading.Lock()
        self._default: Optional[Session] = None
        self.on_node = None  # test hook forwarded to the executor

    # -- sessions ----------------------------------------------------------
    def open_session(self, user: str, password: str) -> Session:
        role = self.c.meta.authenticate(user, password)
        if role is None:
            raise AuthFailed(f"bad credentials for {user!r}")
        with self._mu:
            s = Session(next(self._ids), user, role)
            self.sessions[s.id] = s
        return s

    def session(self, sid: int) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise UnknownSession(f"session {sid} not found") from None

    def close_session(self, sid: int):
        self.sessions.pop(sid, None)

    def default_session(self) -> Session:
        if self._default is None:
            self._default = self.open_session("root", "root")
        return self._default

    # -- statements --------------------------------------------------------
    def execute(self, session: Session, text: str, optimize_plan: Optional[bool] = None) -> ResultSet:
        t0 = time.perf_counter()
        stmt = parse(text)
        with self._mu:
            qid = str(next(self._qids))
        meta = self.c.meta
        meta.register_query(qid, {"qid": qid, "user": session.user, "session": session.id,
                                  "stmt": text, "start": time.time()})
        try:
            rs = self._run(session, stmt, qid, self.optimize_plans if optimize_plan is None else optimize_plan)
        finally:
            meta.finish_query(qid)
        rs.qid = qid
        rs.space = session.space
        rs.latency_us = int((time.perf_counter() - t0) * 1e6)
        if rs.latency_us / 1000.0 >= self.c.config.slow_query_ms:
            with self.c.lock:
                meta.record_slow_query({"qid": qid, "user": session.user, "stmt": text,
                                        "duration_us": rs.latency_us})
        return rs

    def explain(self, session: Session, text: str) -> str:
        return self.execute(session, "EXPLAIN " + text).plan

    def _run(self, session: Session, stmt: A.Stmt, qid: str, opt: bool) -> ResultSet:
        mode = None
        if isinstance(stmt, A.Explain):
            mode = "profile" if stmt.profile else "explain"
            stmt = stmt.stmt
        self._authorize(session, stmt)
        if isinstance(stmt, A.Use):
            self.c.meta.catalog.space(stmt.space)
            session.space = stmt.space
            return ResultSet([])
        cat = self.c.meta.snapshot()
        sc = None
        if session.space is not None:
            if session.space not in cat.spaces:
                session.space = None
            else:
                sc = cat.space(session.space)
        root = plan(validate(stmt, sc))
        if opt:
            root = optimize(root)
        if mode == "explain":
            text = render(root)
            return ResultSet(["plan"], [(text,)], plan=text)
        ctx = ExecContext(
            storage=self.c.storage,
            space=session.space,
            part_of=(lambda vid, sd=sc.space: _part_of(sd, vid)) if sc is not None else None,
            is_killed=lambda: self.c.meta.is_killed(qid),
            admin=lambda node: self._admin(session, node),
            on_node=self.on_node,
        )
        ds = execute(root, ctx)
        rs = ResultSet(list(ds.columns), list(ds.rows))
        if mode == "profile":
            rs.plan = render(root, ctx.stats)
        return rs

    def _authorize(self, session: Session, stmt: A.Stmt):
        if session.role == ADMIN or isinstance(stmt, _USER_OK):
            return
        if isinstance(stmt, A.ChangePassword) and stmt.user == session.user:
            return
        if isinstance(stmt, A.KillQuery):
            q = self.c.meta.running.get(stmt.qid)
            if q is not None and q["user"] == session.user:
                return
        raise PermissionDenied(f"user {session.user!r} may not run {type(stmt).__name__}")

    # -- DDL, DML and admin ----------------------------------------------
    def _admin(self, session: Session, node: PlanNode) -> DataSet:
        s = node.args["stmt"]
        if self.c.storage.read_only and not isinstance(s, (A.Show, A.Describe, A.KillQuery)):
            raise ReadOnlyCluster("this cluster is a read-only secondary")
        handler = getattr(self, "_do_" + type(s).__name__)
        with self.c.lock:
            out = handler(session, s, node.args.get("info"))
        return out if out is not None else DataSet([])

    # mutations
    def _do_InsertVertex(self, session, s, info):
        self.c.storage.insert_vertices(session.space, info["items"], info["ignore_index"], info["if_not_exists"])

    def _do_InsertEdge(self, session, s, info):
        for src, edge, rank, dst, props in info["items"]:
            self.c.storage.insert_edge(session.space, src, edge, rank, dst, props, info["if_not_exists"])

    def _do_DeleteVertex(self, session, s, info):
        for vid in info["vids"]:
            self.c.storage.delete_vertex(session.space, vid, info["with_edge"])

    def _do_DeleteEdge(self, session, s, info):
        for src, edge, rank, dst in info["refs"]:
            self.c.storage.delete_edge(session.space, src, edge, rank, dst)

    # spaces
    def _do_CreateSpace(self, session, s: A.CreateSpace, info):
        cfg = self.c.config
        opts = {"partition_num": cfg.partition_num, "replica_factor": cfg.replica_factor, "vid_len": cfg.vid_len}
        for k, v in s.options:
            if k == "vid_type":
                m = re.fullmatch(r"FIXED_STRING\((\d+)\)", str(v), re.IGNORECASE)
                if m is None:
                    raise SemanticError(f"unsupported vid_type {v!r}; use FIXED_STRING(n)")
                opts["vid_len"] = int(m.group(1))
            elif k in opts:
                if not isinstance(v, int) or v <= 0:
                    raise SemanticError(f"{k} must be a positive integer")
                opts[k] = v
            else:
                raise SemanticError(f"unknown space option {k!r}")
        self.c.meta.create_space(s.name, opts["partition_num"], opts["replica_factor"], opts["vid_len"],
                                 s.if_not_exists)

    def _do_DropSpace(self, session, s: A.DropSpace, info):
        self.c.meta.drop_space(s.name, s.if_exists)
        for other in list(self.sessions.values()) + [session]:
            if other.space == s.name:
                other.space = None

    # schemas
    @staticmethod
    def _prop_def(p: A.PropSpec) -> PropDef:
        ptype = PropertyType.parse(p.type)
        default = None
        if p.default is not None:
            default = coerce_value(ptype, eval_const(p.default))
        return PropDef(p.name, ptype, p.nullable is not False, default)

    def _do_CreateSchema(self, session, s: A.CreateSchema, info):
        props = [self._prop_def(p) for p in s.props]
        make = self.c.meta.create_edge if s.is_edge else self.c.meta.create_tag
        make(session.space, s.name, props, s.if_not_exists)

    def _do_AlterSchema(self, session, s: A.AlterSchema, info):
        add, drop, change = [], [], []
        for action, items in s.clauses:
            if action == "ADD":
                add += [self._prop_def(p) for p in items]
            elif action == "DROP":
                drop += list(items)
            else:
                change += [self._prop_def(p) for p in items]
        self.c.meta.alter_schema(session.space, s.name, s.is_edge, add, drop, change)

    def _do_DropSchema(self, session, s: A.DropSchema, info):
        self.c.meta.drop_schema(session.space, s.name, s.is_edge, s.if_exists)

    def _do_CreateIndex(self, session, s: A.CreateIndex, info):
        self.c.meta.create_index(session.space, s.name, s.schema, s.is_edge, s.fields, s.if_not_exists)

    def _do_DropIndex(self, session, s: A.DropIndex, info):
        sc = self.c.meta.catalog.space(session.space)
        if s.name in sc.indexes and sc.indexes[s.name].is_edge != s.is_edge:
            raise SemanticError(f"{s.name!r} is not an {'edge' if s.is_edge else 'tag'} index")
        self.c.meta.drop_index(session.space, s.name, s.if_exists)

    def _do_RebuildIndex(self, session, s: A.RebuildIndex, info):
        sc = self.c.meta.catalog.space(session.space)
        rows = []
        for name in s.names:
            ix = sc.index(name)
            if ix.is_edge != s.is_edge:
                raise SemanticError(f"{name!r} is not an {'edge' if s.is_edge else 'tag'} index")
            self.c.storage.rebuild_index(session.space, name)
            rows.append((name, len(self.c.storage.index_entries(session.space, name))))
        return DataSet(["Index", "Entries"], rows)

    # hosts
    def _do_AddHosts(self, session, s: A.AddHosts, info):
        for h in s.hosts:
            self.c.add_host(h)

    def _do_DropHosts(self, session, s: A.DropHosts, info):
        rows = []
        for h in s.hosts:
            rows += [tuple(m) for m in self.c.remove_host(h)]
        return DataSet(["Space ID", "Partition", "From", "To"], rows)

    def _do_BalanceData(self, session, s, info):
        return DataSet(["Space ID", "Partition", "From", "To"], [tuple(m) for m in self.c.balance()])

    # users
    def _do_CreateUser(self, session, s: A.CreateUser, info):
        self.c.meta.create_user(s.name, s.password, USER, s.if_not_exists)

    def _do_DropUser(self, session, s: A.DropUser, info):
        self.c.meta.drop_user(s.name, s.if_exists)

    def _do_Grant(self, session, s: A.Grant, info):
        self.c.meta.catalog.space(s.space)
        if s.revoke:
            role = USER
        else:
            try:
                role = _ROLE_NAMES[s.role.upper()]
            except KeyError:
                raise SemanticError(f"unknown role {s.role!r}") from None
        self.c.meta.set_role(s.user, role)
        for other in self.sessions.values():
            if other.user == s.user:
                other.role = role

    def _do_ChangePassword(self, session, s: A.ChangePassword, info):
        if self.c.meta.authenticate(s.user, s.old) is None:
            raise AuthFailed(f"old password for {s.user!r} does not match")
        self.c.meta.change_password(s.user, s.new)

    def _do_KillQuery(self, session, s: A.KillQuery, info):
        if s.qid not in self.c.meta.running:
            raise UnknownQueryId(f"no running query {s.qid!r}")
        self.c.meta.kill_query(s.qid)

    # SHOW / DESCRIBE
    def _need_space(self, session) -> str:
        if session.space is None:
            from ..errors import NoSpaceSelected

            raise NoSpaceSelected("no graph space selected; run USE <space> first")
        return session.space

    def _do_Show(self, session, s: A.Show, info):
        cat = self.c.meta.catalog
        w = s.what
        if w == "SPACES":
            return DataSet(["Name"], [(n,) for n in sorted(cat.spaces)])
        if w in ("TAGS", "EDGES"):
            sc = cat.space(self._need_space(session))
            return DataSet(["Name"], [(n,) for n in sorted(sc.schemas(w == "EDGES"))])
        if w in ("TAG_INDEXES", "EDGE_INDEXES"):
            sc = cat.space(self._need_space(session))
            is_edge = w == "EDGE_INDEXES"
            rows = [(ix.name, ix.schema, ", ".join(ix.fields))
                    for ix in sorted(sc.indexes.values(), key=lambda ix: ix.name) if ix.is_edge == is_edge]
            return DataSet(["Index Name", "By Edge" if is_edge else "By Tag", "Columns"], rows)
        if w == "HOSTS":
            load = cat.host_load()
            rows = [(h, "OFFLINE" if h in self.c.down else "ONLINE", load.get(h, 0)) for h in cat.hosts]
            return DataSet(["Host", "Status", "Partitions"], rows)
        if w == "PARTS":
            sc = cat.space(self._need_space(session))
            rows = []
            for part, hosts in sorted(cat.part_hosts(session.space).items()):
                leader = self.c.storage.group(sc.space.id, part).leader_host()
                rows.append((part, leader, ", ".join(hosts)))
            return DataSet(["Partition ID", "Leader", "Peers"], rows)
        if w == "USERS":
            return DataSet(["Account", "Role"], [(n, u["role"]) for n, u in sorted(cat.users.items())])
        if w == "SLOW_QUERIES":
            rows = [(q["qid"], q["user"], q["duration_us"], q["stmt"]) for q in cat.slow_queries]
            return DataSet(["Query ID", "User", "Duration(us)", "Statement"], rows)
        if w == "QUERIES":
            now = time.time()
            rows = [(q["qid"], q["user"], q["session"], int((now - q["start"]) * 1e6), q["stmt"])
                    for q in sorted(self.c.meta.running.values(), key=lambda q: int(q["qid"]))]
            return DataSet(["Query ID", "User", "Session", "Duration(us)", "Statement"], rows)
        raise SemanticError(f"unsupported SHOW {w}")

    def _do_Describe(self, session, s: A.Describe, info):
        cat = self.c.meta.catalog
        if s.what == "SPACE":
            sd = cat.space(s.name).space
            return DataSet(["ID", "Name", "Partition Number", "Replica Factor", "Vid Type"],
                           [(sd.id, sd.name, sd.partition_num, sd.replica_factor, f"FIXED_STRING({sd.vid_len})")])
        sc = cat.space(self._need_space(session))
        if s.what in ("TAG", "EDGE"):
            schema = sc.schema(s.name, s.what == "EDGE").latest
            rows = [(p.name, p.type.value, "YES" if p.nullable else "NO", p.default) for p in schema.props]
            return DataSet(["Field", "Type", "Null", "Default"], rows)
        ix = sc.index(s.name)
        if ix.is_edge != (s.what == "EDGE_INDEX"):
            raise SemanticError(f"{s.name!r} is not a {s.what.lower().replace('_', ' ')}")
        schema = sc.schema(ix.schema, ix.is_edge).latest
        return DataSet(["Field", "Type"], [(f, schema.prop(f).type.value) for f in ix.fields])


def _part_of(sd, vid) -> int:
    from ..meta import hash_part

    return hash_part(vid, sd.partition_num, sd.vid_len)
