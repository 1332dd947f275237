"""Interactive console: ``;``-terminated statements, table output, latency footer."""

from __future__ import annotations

import datetime as dt
import sys
import time
from typing import Callable, Optional, TextIO

from ..errors import GraphError
from .client import Response

PROMPT, CONT = "(kvgraph) > ", "          > "


def format_value(v) -> str:
    if v is None:
        return "__NULL__"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, (dt.date, dt.datetime)):
        return v.isoformat()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    return str(v)


def format_table(columns: list, rows: list) -> str:
    cells = [[format_value(v) for v in r] for r in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(vals):
        return "|" + "|".join(f" {v.ljust(w)} " for v, w in zip(vals, widths)) + "|"

    return "\n".join([sep, line(columns), sep] + [line(r) for r in cells] + [sep])


def footer(n: int, server_us: int, total_us: int) -> str:
    return f"Got {n} rows (time spent {server_us}/{total_us} us)"


def split_statements(buffer: str) -> tuple[list[str], str]:
    """Complete ``;``-terminated statements in ``buffer`` and the unfinished rest.

    Semicolons inside quoted strings or backquoted names do not terminate.
    """
    out, cur, quote, i = [], [], None, 0
    while i < len(buffer):
        ch = buffer[i]
        if quote:
            cur.append(ch)
            if ch == "\\" and quote == '"' and i + 1 < len(buffer):
                cur.append(buffer[i + 1])
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "\"`'":
            quote = ch
            cur.append(ch)
        elif ch == ";":
            stmt = "".join(cur).strip()
            if stmt:
                out.append(stmt)
            cur = []
        else:
            cur.append(ch)
        i += 1
    return out, "".join(cur)


class Console:
    """Runs statements through ``client`` (anything with ``execute(text)`` and ``reconnect()``)."""

    def __init__(self, client, out: Optional[TextIO] = None, interactive: bool = False):
        self.client = client
        self.out = out if out is not None else sys.stdout
        self.interactive = interactive
        self.explain = False
        self.errors = 0

    def _print(self, text: str = ""):
        self.out.write(text + "\n")

    def command(self, line: str) -> bool:
        """Console commands start with ':'; returns False to quit."""
        parts = line[1:].split()
        if not parts:
            return True
        if parts[0] in ("quit", "exit", "q"):
            return False
        if parts[0] == "explain" and len(parts) == 2 and parts[1] in ("on", "off"):
            self.explain = parts[1] == "on"
            self._print(f"explain {'on' if self.explain else 'off'}")
        else:
            self._print(f"[ERROR]: unknown command {line.strip()!r}")
            self.errors += 1
        return True

    def run_statement(self, stmt: str):
        try:
            if self.explain and not stmt.upper().startswith(("EXPLAIN", "PROFILE")):
                plan = self.client.execute("EXPLAIN " + stmt).plan
                if plan:
                    self._print(plan)
            resp = self.client.execute(stmt)
        except (ConnectionError, OSError) as e:
            self.errors += 1
            self._print(f"[ERROR]: connection lost ({e})")
            if self.interactive:
                self._reconnect()
            else:
                raise
            return
        except GraphError as e:
            self.errors += 1
            self._print(f"[ERROR ({e.code})]: {e.message}")
            return
        if resp.columns == ["plan"] and resp.plan:
            self._print(resp.plan)
        else:
            if resp.columns:
                self._print(format_table(resp.columns, resp.rows))
            if resp.plan:
                self._print(resp.plan)
        self._print(footer(len(resp.rows), resp.latency_us, resp.total_us))
        self._print()

    def _reconnect(self):
        try:
            self.client.reconnect()
            self._print("reconnected")
        except (GraphError, OSError) as e:
            self._print(f"[ERROR]: reconnect failed ({e}); retry the statement or :quit")

    def loop(self, stdin: TextIO, prompt: Optional[Callable[[str], None]] = None) -> int:
        """Read until EOF; exit code 0 when every statement succeeded, 1 otherwise."""
        buffer = ""
        while True:
            if prompt is not None:
                prompt(CONT if buffer.strip() else PROMPT)
            line = stdin.readline()
            if not line:
                break
            if not buffer.strip() and line.strip().startswith(":"):
                if not self.command(line.strip()):
                    break
                continue
            buffer += line
            stmts, buffer = split_statements(buffer)
            for s in stmts:
                try:
                    self.run_statement(s)
                except (ConnectionError, OSError):
                    return 2
        if buffer.strip():
            self.run_statement(buffer.strip())
        return 0 if self.errors == 0 else 1


class LocalClient:
    """Console adapter over an in-process cluster (no sockets)."""

    def __init__(self, cluster, user: str = "root", password: str = "root"):
        self.cluster = cluster
        self.session = cluster.graph.open_session(user, password)

    def execute(self, stmt: str):
        t0 = time.perf_counter()
        rs = self.cluster.graph.execute(self.session, stmt)
        total = int((time.perf_counter() - t0) * 1e6)
        return Response(list(rs.columns), [list(r) for r in rs.rows], rs.space, rs.latency_us, total, rs.plan, rs.qid)

    def reconnect(self):
        pass

    def close(self):
        self.cluster.graph.close_session(self.session.id)
