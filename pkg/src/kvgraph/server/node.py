"""A node process: an in-process cluster behind the JSON wire protocol.

``Dispatcher.handle`` maps one request frame to one response frame and is
usable without sockets; ``Server`` wraps it in a threaded TCP listener.
"""

from __future__ import annotations

import socket
import socketserver
import threading
import time
from typing import Optional

from ..cluster import Cluster
from ..errors import GraphError, ProtocolError, QuerySyntaxError
from ..query import ast as A
from ..query.parser import parse
from .config import ServerConfig
from .logs import NodeLogs
from .metrics import MetricsRegistry
from .protocol import encode_value, read_frame, write_frame

OPS = ("ping", "auth", "execute", "signout", "metrics")


def verb_of(text: str) -> str:
    """Metric label of a statement: go, fetch, lookup, insert, ddl, ..."""
    try:
        s = parse(text)
    except GraphError:
        return "invalid"
    while isinstance(s, (A.Explain, A.Pipe)):
        s = s.stmt if isinstance(s, A.Explain) else s.left
    name = type(s).__name__
    return {
        "Go": "go", "Fetch": "fetch", "Lookup": "lookup", "Yield": "yield", "InsertVertex": "insert",
        "InsertEdge": "insert", "DeleteVertex": "delete", "DeleteEdge": "delete",
    }.get(name, "admin")


class Dispatcher:
    def __init__(self, cluster: Cluster, metrics: Optional[MetricsRegistry] = None, logs: Optional[NodeLogs] = None):
        self.cluster = cluster
        self.metrics = metrics or MetricsRegistry()
        self.logs = logs or NodeLogs("node", None)
        self._session_locks: dict[int, threading.Lock] = {}
        self._mu = threading.Lock()
        for name in ("query", "query_error"):
            self.metrics.declare(name)
        st = cluster.storage.stats
        self.metrics.gauge("storage.reads", lambda: st.reads)
        self.metrics.gauge("storage.writes", lambda: st.writes)
        self.metrics.gauge("storage.proposals", lambda: st.proposals)
        self.metrics.gauge("storage.toss_started", lambda: st.toss_started)
        self.metrics.gauge("kv.value_tier_reads", self._value_tier_reads)
        self.metrics.gauge("kv.key_reads", self._key_reads)
        self.metrics.gauge("raft.max_term", self._max_term)

    # -- gauges ------------------------------------------------------------
    def _replicas(self):
        for g in list(self.cluster.storage.groups.values()):
            for sm in list(g.sms.values()):
                yield sm

    def _value_tier_reads(self):
        return sum(getattr(sm.kv, "value_tier_reads", 0) for sm in self._replicas())

    def _key_reads(self):
        return sum(getattr(sm.kv, "key_reads", 0) for sm in self._replicas())

    def _max_term(self):
        groups = [self.cluster.meta_group] + list(self.cluster.storage.groups.values())
        return max((n.term for g in groups for n in g.nodes.values()), default=0)

    # -- requests ----------------------------------------------------------
    def handle(self, frame) -> dict:
        rid = frame.get("id") if isinstance(frame, dict) else None
        try:
            if not isinstance(frame, dict):
                raise ProtocolError("frame must be a JSON object")
            op = frame.get("op")
            if op not in OPS:
                raise ProtocolError(f"unknown op {op!r}; expected one of {', '.join(OPS)}")
            body = frame.get("body") or {}
            if not isinstance(body, dict):
                raise ProtocolError("body must be an object")
            result = getattr(self, "_op_" + op)(body)
            return {"id": rid, "code": 0, "body": result}
        except GraphError as e:
            return {"id": rid, "code": e.code, "error": _error_body(e)}
        except Exception as e:  # a bug must still produce a structured reply
            self.logs.error("internal error", error=repr(e))
            return {"id": rid, "code": -1, "error": {"message": f"internal error: {e!r}"}}

    def _op_ping(self, body):
        return {"pong": True}

    def _op_auth(self, body):
        user, password = _field(body, "user", str), _field(body, "password", str)
        s = self.cluster.graph.open_session(user, password)
        self.logs.info("session opened", session=s.id, user=user)
        return {"session": s.id}

    def _op_signout(self, body):
        sid = _field(body, "session", int)
        self.cluster.graph.session(sid)
        self.cluster.graph.close_session(sid)
        return {}

    def _op_metrics(self, body):
        return {"text": self.metrics.dump()}

    def _op_execute(self, body):
        sid = _field(body, "session", int)
        text = _field(body, "stmt", str)
        graph = self.cluster.graph
        session = graph.session(sid)
        with self._mu:
            lock = self._session_locks.setdefault(sid, threading.Lock())
        verb = verb_of(text)
        t0 = time.perf_counter()
        code = 0
        with lock:  # one statement in flight per session
            try:
                rs = graph.execute(session, text)
            except GraphError as e:
                code = e.code
                raise
            finally:
                us = int((time.perf_counter() - t0) * 1e6)
                self.metrics.observe("query", us)
                self.metrics.observe(f"query_{verb}", us)
                if code:
                    self.metrics.observe("query_error", 1)
                self.logs.statement(session=sid, user=session.user, stmt=text, code=code, latency_us=us)
        return {
            "columns": list(rs.columns),
            "rows": [[encode_value(v) for v in r] for r in rs.rows],
            "space": rs.space,
            "latency_us": rs.latency_us,
            "plan": rs.plan,
            "qid": rs.qid,
        }


def _field(body: dict, name: str, typ):
    v = body.get(name)
    if not isinstance(v, typ) or isinstance(v, bool):
        raise ProtocolError(f"field {name!r} must be {typ.__name__}")
    return v


def _error_body(e: GraphError) -> dict:
    out = {"message": e.message, "type": type(e).__name__}
    if isinstance(e, QuerySyntaxError):
        out.update(line=e.line, column=e.column, expected=list(e.expected))
    return out


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        disp: Dispatcher = self.server.dispatcher
        sock = self.request
        while True:
            try:
                frame = read_frame(sock)
            except ConnectionError:
                return
            except ProtocolError as e:
                write_frame(sock, {"id": None, "code": e.code, "error": _error_body(e)})
                return
            except OSError:
                return
            try:
                write_frame(sock, disp.handle(frame))
            except OSError:
                return


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class Server:
    def __init__(self, config: ServerConfig):
        self.config = config.validate()
        self.logs = NodeLogs(config.node_id, config.log_dir, config.log_max_bytes, config.log_backups)
        self.cluster = Cluster(config.cluster_config())
        self.metrics = MetricsRegistry()
        self.dispatcher = Dispatcher(self.cluster, self.metrics, self.logs)
        self._tcp: Optional[_TCPServer] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address if self._tcp else (self.config.host, self.config.port)

    def start(self) -> "Server":
        try:
            self._tcp = _TCPServer((self.config.host, self.config.port), _Handler)
        except OSError as e:
            self.logs.error("startup failed", error=str(e))
            raise GraphError(f"cannot listen on {self.config.host}:{self.config.port}: {e}") from None
        self._tcp.dispatcher = self.dispatcher
        self._thread = threading.Thread(target=self._tcp.serve_forever, name="kvgraph-server", daemon=True)
        self._thread.start()
        self.logs.info("listening", host=self.address[0], port=self.address[1], roles=self.config.roles,
                       peers=self.config.hosts)
        return self

    def serve_forever(self):
        if self._tcp is None:
            self.start()
        try:
            while self._thread.is_alive():
                self._thread.join(0.5)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def stop(self):
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
            self._tcp = None
        for disk in self.cluster.disks.values():
            close = getattr(disk, "close", None)
            if close is not None:
                close()
        self.logs.info("stopped")
        self.logs.close()


def serve(config: ServerConfig) -> Server:
    return Server(config).start()


def port_in_use(host: str, port: int) -> bool:
    with socket.socket() as s:
        return s.connect_ex((host, port)) == 0
