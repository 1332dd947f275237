"""Canonical pretty-printer; ``parse(pretty(t)) == t`` for every tree the parser produces."""

from __future__ import annotations

import datetime as dt
import re

from . import ast as A
from .parser import RESERVED

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_STR_ESC = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r", "\0": "\\0"}


def ident(name: str) -> str:
    if _IDENT.match(name) and name.upper() not in RESERVED and name.upper() not in ("EDGE", "VERTEX"):
        return name
    return f"`{name}`"


def string(s: str) -> str:
    return '"' + "".join(_STR_ESC.get(c, c) for c in s) + '"'


def literal(v) -> str:
    if v is None:
        return "NULL"
    if v is True:
        return "TRUE"
    if v is False:
        return "FALSE"
    if isinstance(v, str):
        return string(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dt.datetime):
        return f'datetime("{v.isoformat()}")'
    if isinstance(v, dt.date):
        return f'date("{v.isoformat()}")'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(literal(x) for x in v) + "]"
    return str(v)


def _operand(e: A.Expr) -> str:
    s = expr(e)
    return f"({s})" if isinstance(e, (A.Binary, A.Unary)) else s


def expr(e: A.Expr) -> str:
    if isinstance(e, A.Literal):
        return literal(e.value)
    if isinstance(e, A.ListExpr):
        return "[" + ", ".join(expr(i) for i in e.items) + "]"
    if isinstance(e, A.Unary):
        sep = " " if e.op == "NOT" else ""
        return f"{e.op}{sep}{_operand(e.operand)}"
    if isinstance(e, A.Binary):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    if isinstance(e, A.LabelProp):
        return f"{ident(e.label)}.{ident(e.prop)}"
    if isinstance(e, A.VertexProp):
        sigil = "$^" if e.which == "src" else "$$"
        return f"{sigil}.{ident(e.tag)}.{ident(e.prop)}"
    if isinstance(e, A.InputProp):
        return f"$-.{ident(e.col)}"
    if isinstance(e, A.Label):
        return ident(e.name)
    if isinstance(e, A.Special):
        return e.name
    if isinstance(e, A.Star):
        return "*"
    if isinstance(e, A.FuncCall):
        d = "DISTINCT " if e.distinct else ""
        return f"{ident(e.name)}({d}{', '.join(expr(a) for a in e.args)})"
    raise TypeError(f"cannot print {e!r}")


def yield_clause(y: A.YieldClause) -> str:
    items = []
    for it in y.items:
        s = expr(it.expr)
        if it.alias is not None:
            s += f" AS {ident(it.alias)}"
        items.append(s)
    return "YIELD " + ("DISTINCT " if y.distinct else "") + ", ".join(items)


def edge_ref(r: A.EdgeRef) -> str:
    s = f"{_ref_operand(r.src)}->{_ref_operand(r.dst)}"
    if r.rank is not None:
        s += f"@{_ref_operand(r.rank)}"
    return s


def _ref_operand(e: A.Expr) -> str:
    # edge-ref endpoints are parsed at additive level; wrap anything looser
    s = expr(e)
    if isinstance(e, A.Binary) or (isinstance(e, A.Unary) and e.op == "NOT"):
        return f"({s})"
    if isinstance(e, A.Literal) and isinstance(e.value, (int, float)) and not isinstance(e.value, bool) and e.value < 0:
        return f"({s})"
    return s


def prop_spec(p: A.PropSpec) -> str:
    s = f"{ident(p.name)} {p.type}"
    if p.nullable is False:
        s += " NOT NULL"
    elif p.nullable is True:
        s += " NULL"
    if p.default is not None:
        s += f" DEFAULT {_operand(p.default) if not isinstance(p.default, A.Literal) else expr(p.default)}"
    return s


def _names(ns) -> str:
    return ", ".join(ident(n) for n in ns)


def _ine(b: bool) -> str:
    return "IF NOT EXISTS " if b else ""


def _ie(b: bool) -> str:
    return "IF EXISTS " if b else ""


def _kind(is_edge: bool) -> str:
    return "EDGE" if is_edge else "TAG"


def _option(v) -> str:
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str) and re.match(r"FIXED_STRING\(\d+\)\Z", v):
        return v
    if isinstance(v, str) and _IDENT.match(v) and v.upper() not in RESERVED:
        return v
    return string(v)


def stmt(s: A.Stmt) -> str:
    if isinstance(s, A.Explain):
        return ("PROFILE " if s.profile else "EXPLAIN ") + stmt(s.stmt)
    if isinstance(s, A.Pipe):
        return f"{stmt(s.left)} | {stmt(s.right)}"
    if isinstance(s, A.Go):
        out = ["GO"]
        if s.steps != 1:
            out.append(f"{s.steps} STEPS")
        out.append("FROM " + ", ".join(expr(v) for v in s.src))
        out.append("OVER " + ("*" if s.over == ("*",) else _names(s.over)))
        if s.direction == "in":
            out.append("REVERSELY")
        elif s.direction == "both":
            out.append("BIDIRECT")
        if s.where is not None:
            out.append("WHERE " + expr(s.where))
        if s.yield_ is not None:
            out.append(yield_clause(s.yield_))
        return " ".join(out)
    if isinstance(s, A.Fetch):
        names = "*" if s.names == ("*",) else _names(s.names)
        if s.is_edge:
            refs = ", ".join(edge_ref(r) for r in s.refs)
        else:
            refs = ", ".join(expr(r) for r in s.refs)
        out = f"FETCH PROP ON {names} {refs}"
        return out + (" " + yield_clause(s.yield_) if s.yield_ else "")
    if isinstance(s, A.Lookup):
        out = f"LOOKUP ON {ident(s.schema)}"
        if s.where is not None:
            out += " WHERE " + expr(s.where)
        return out + (" " + yield_clause(s.yield_) if s.yield_ else "")
    if isinstance(s, A.Yield):
        out = yield_clause(s.yield_)
        return out + (" WHERE " + expr(s.where) if s.where is not None else "")
    if isinstance(s, A.OrderBy):
        return "ORDER BY " + ", ".join(f"{expr(e)} {'ASC' if asc else 'DESC'}" for e, asc in s.items)
    if isinstance(s, A.Limit):
        return f"LIMIT {s.offset}, {s.count}" if s.offset else f"LIMIT {s.count}"
    if isinstance(s, A.GroupBy):
        return "GROUP BY " + ", ".join(expr(k) for k in s.keys) + " " + yield_clause(s.yield_)
    if isinstance(s, A.Use):
        return f"USE {ident(s.space)}"
    if isinstance(s, A.CreateSpace):
        out = f"CREATE SPACE {_ine(s.if_not_exists)}{ident(s.name)}"
        if s.options:
            out += "(" + ", ".join(f"{k} = {_option(v)}" for k, v in s.options) + ")"
        return out
    if isinstance(s, A.DropSpace):
        return f"DROP SPACE {_ie(s.if_exists)}{ident(s.name)}"
    if isinstance(s, A.Show):
        return "SHOW " + s.what.replace("_", " ")
    if isinstance(s, A.Describe):
        return "DESCRIBE " + s.what.replace("_", " ") + " " + ident(s.name)
    if isinstance(s, A.CreateSchema):
        props = ", ".join(prop_spec(p) for p in s.props)
        return f"CREATE {_kind(s.is_edge)} {_ine(s.if_not_exists)}{ident(s.name)}({props})"
    if isinstance(s, A.AlterSchema):
        parts = []
        for action, items in s.clauses:
            body = _names(items) if action == "DROP" else ", ".join(prop_spec(p) for p in items)
            parts.append(f"{action} ({body})")
        return f"ALTER {_kind(s.is_edge)} {ident(s.name)} " + ", ".join(parts)
    if isinstance(s, A.DropSchema):
        return f"DROP {_kind(s.is_edge)} {_ie(s.if_exists)}{ident(s.name)}"
    if isinstance(s, A.CreateIndex):
        return (f"CREATE {_kind(s.is_edge)} INDEX {_ine(s.if_not_exists)}{ident(s.name)} "
                f"ON {ident(s.schema)}({_names(s.fields)})")
    if isinstance(s, A.DropIndex):
        return f"DROP {_kind(s.is_edge)} INDEX {_ie(s.if_exists)}{ident(s.name)}"
    if isinstance(s, A.RebuildIndex):
        return f"REBUILD {_kind(s.is_edge)} INDEX {_names(s.names)}"
    if isinstance(s, A.InsertVertex):
        flags = _ine(s.if_not_exists) + ("IGNORE_EXISTED_INDEX " if s.ignore_index else "")
        tags = ", ".join(f"{ident(t)}({_names(ps)})" for t, ps in s.tags)
        rows = ", ".join(f"{_ref_operand(v)}:({', '.join(expr(x) for x in vals)})" for v, vals in s.rows)
        return f"INSERT VERTEX {flags}{tags} VALUES {rows}"
    if isinstance(s, A.InsertEdge):
        rows = ", ".join(f"{edge_ref(r)}:({', '.join(expr(x) for x in vals)})" for r, vals in s.rows)
        return f"INSERT EDGE {_ine(s.if_not_exists)}{ident(s.edge)}({_names(s.props)}) VALUES {rows}"
    if isinstance(s, A.DeleteVertex):
        out = "DELETE VERTEX " + ", ".join(_ref_operand(v) for v in s.vids)
        return out + (" WITH EDGE" if s.with_edge else "")
    if isinstance(s, A.DeleteEdge):
        return f"DELETE EDGE {ident(s.edge)} " + ", ".join(edge_ref(r) for r in s.refs)
    if isinstance(s, A.AddHosts):
        return "ADD HOSTS " + ", ".join(string(h) for h in s.hosts)
    if isinstance(s, A.DropHosts):
        return "DROP HOSTS " + ", ".join(string(h) for h in s.hosts)
    if isinstance(s, A.BalanceData):
        return "BALANCE DATA"
    if isinstance(s, A.CreateUser):
        return f"CREATE USER {_ine(s.if_not_exists)}{ident(s.name)} WITH PASSWORD {string(s.password)}"
    if isinstance(s, A.DropUser):
        return f"DROP USER {_ie(s.if_exists)}{ident(s.name)}"
    if isinstance(s, A.Grant):
        verb, prep = ("REVOKE", "FROM") if s.revoke else ("GRANT", "TO")
        return f"{verb} ROLE {ident(s.role)} ON {ident(s.space)} {prep} {ident(s.user)}"
    if isinstance(s, A.ChangePassword):
        return f"CHANGE PASSWORD {ident(s.user)} FROM {string(s.old)} TO {string(s.new)}"
    if isinstance(s, A.KillQuery):
        return f"KILL QUERY {string(s.qid)}"
    raise TypeError(f"cannot print {s!r}")


pretty = stmt
