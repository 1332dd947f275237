"""Blocking client for the wire protocol."""

from __future__ import annotations

import itertools
import socket
import time
from dataclasses import dataclass, field
from typing import Optional

from ..errors import GraphError
from .protocol import decode_value, read_frame, write_frame


class RemoteError(GraphError):
    def __init__(self, code: int, error: dict):
        super().__init__(error.get("message", "error"))
        self.code = code
        self.error = error


@dataclass
class Response:
    columns: list
    rows: list
    space: Optional[str] = None
    latency_us: int = 0  # server side
    total_us: int = 0  # measured by the client
    plan: Optional[str] = None
    qid: Optional[str] = None
    extra: dict = field(default_factory=dict)


class Client:
    def __init__(self, host: str = "127.0.0.1", port: int = 9669, timeout: float = 30.0):
        self.host, self.port, self.timeout = host, port, timeout
        self.sock: Optional[socket.socket] = None
        self.session: Optional[int] = None
        self._ids = itertools.count(1)
        self._creds: Optional[tuple[str, str]] = None

    def connect(self) -> "Client":
        self.sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        return self

    def close(self):
        if self.sock is not None:
            try:
                if self.session is not None:
                    self.request("signout", {"session": self.session})
            except (GraphError, OSError):
                pass
            self.sock.close()
            self.sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, op: str, body: Optional[dict] = None) -> dict:
        if self.sock is None:
            self.connect()
        rid = next(self._ids)
        write_frame(self.sock, {"id": rid, "op": op, "body": body or {}})
        resp = read_frame(self.sock)
        if resp.get("id") != rid:
            raise ConnectionError(f"response id {resp.get('id')} does not match request {rid}")
        if resp.get("code", -1) != 0:
            raise RemoteError(resp.get("code", -1), resp.get("error") or {})
        return resp.get("body") or {}

    def authenticate(self, user: str = "root", password: str = "root") -> int:
        self.session = self.request("auth", {"user": user, "password": password})["session"]
        self._creds = (user, password)
        return self.session

    def reconnect(self):
        if self.sock is not None:
            self.sock.close()
        self.sock = None
        self.connect()
        if self._creds is not None:
            self.authenticate(*self._creds)

    def execute(self, stmt: str) -> Response:
        t0 = time.perf_counter()
        body = self.request("execute", {"session": self.session, "stmt": stmt})
        total = int((time.perf_counter() - t0) * 1e6)
        return Response(
            columns=body["columns"],
            rows=[[decode_value(v) for v in r] for r in body["rows"]],
            space=body.get("space"),
            latency_us=body.get("latency_us", 0),
            total_us=total,
            plan=body.get("plan"),
            qid=body.get("qid"),
        )

    def metrics(self) -> str:
        return self.request("metrics")["text"]
