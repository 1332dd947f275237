"""Syntax tree.  Every node carries a source span that is ignored by equality."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass(frozen=True)
class Span:
    line: int
    col: int


def _span():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

class Expr:
    span: Optional[Span]


@dataclass(frozen=True)
class Literal(Expr):
    value: Any
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ListExpr(Expr):
    items: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "-", "NOT"
    operand: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * / % == != < <= > >= AND OR XOR IN CONTAINS
    left: Expr
    right: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class LabelProp(Expr):
    """``name.prop``: an edge property in GO, a tag property in FETCH/LOOKUP."""

    label: str
    prop: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class VertexProp(Expr):
    """``$^.tag.prop`` (which="src") or ``$$.tag.prop`` (which="dst")."""

    which: str
    tag: str
    prop: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class InputProp(Expr):
    """``$-.col``."""

    col: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Label(Expr):
    """A bare identifier (a column name in ORDER BY / GROUP BY)."""

    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Special(Expr):
    """``EDGE``, ``VERTEX``, ``$$`` or ``$^`` used as a function argument."""

    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Star(Expr):
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class FuncCall(Expr):
    name: str  # lower case
    args: tuple
    distinct: bool = False
    span: Optional[Span] = _span()


# ---------------------------------------------------------------------------
# clauses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class YieldItem:
    expr: Expr
    alias: Optional[str] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class YieldClause:
    items: tuple
    distinct: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PropSpec:
    name: str
    type: str
    nullable: Optional[bool] = None  # None: unspecified (nullable)
    default: Optional[Expr] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class EdgeRef:
    src: Expr
    dst: Expr
    rank: Optional[Expr] = None
    span: Optional[Span] = _span()


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------

class Stmt:
    span: Optional[Span]


@dataclass(frozen=True)
class Use(Stmt):
    space: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CreateSpace(Stmt):
    name: str
    options: tuple = ()  # ((key, value), ...)
    if_not_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DropSpace(Stmt):
    name: str
    if_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Show(Stmt):
    what: str  # SPACES TAGS EDGES TAG_INDEXES EDGE_INDEXES HOSTS PARTS USERS SLOW_QUERIES QUERIES
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Describe(Stmt):
    what: str  # SPACE TAG EDGE TAG_INDEX EDGE_INDEX
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CreateSchema(Stmt):
    is_edge: bool
    name: str
    props: tuple
    if_not_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class AlterSchema(Stmt):
    is_edge: bool
    name: str
    clauses: tuple  # (("ADD", (PropSpec...)), ("DROP", (names...)), ("CHANGE", (PropSpec...)))
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DropSchema(Stmt):
    is_edge: bool
    name: str
    if_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CreateIndex(Stmt):
    is_edge: bool
    name: str
    schema: str
    fields: tuple
    if_not_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DropIndex(Stmt):
    is_edge: bool
    name: str
    if_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RebuildIndex(Stmt):
    is_edge: bool
    names: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class InsertVertex(Stmt):
    tags: tuple  # ((tag, (prop, ...)), ...)
    rows: tuple  # ((vid_expr, (value_expr, ...)), ...)
    if_not_exists: bool = False
    ignore_index: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class InsertEdge(Stmt):
    edge: str
    props: tuple
    rows: tuple  # ((EdgeRef, (value_expr, ...)), ...)
    if_not_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DeleteVertex(Stmt):
    vids: tuple
    with_edge: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DeleteEdge(Stmt):
    edge: str
    refs: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Go(Stmt):
    steps: int
    src: tuple  # vid expressions, or a single InputProp
    over: tuple  # edge names; ("*",) for all
    direction: str = "out"  # out | in | both
    where: Optional[Expr] = None
    yield_: Optional[YieldClause] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Fetch(Stmt):
    is_edge: bool
    names: tuple  # tag names or ("*",); one edge name for edges
    refs: tuple  # vid expressions / EdgeRefs / a single InputProp
    yield_: Optional[YieldClause] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Lookup(Stmt):
    schema: str
    where: Optional[Expr] = None
    yield_: Optional[YieldClause] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Yield(Stmt):
    yield_: YieldClause
    where: Optional[Expr] = None
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class OrderBy(Stmt):
    items: tuple  # ((expr, ascending), ...)
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Limit(Stmt):
    count: int
    offset: int = 0
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class GroupBy(Stmt):
    keys: tuple
    yield_: YieldClause
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Pipe(Stmt):
    left: Stmt
    right: Stmt
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Explain(Stmt):
    stmt: Stmt
    profile: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class AddHosts(Stmt):
    hosts: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DropHosts(Stmt):
    hosts: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BalanceData(Stmt):
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CreateUser(Stmt):
    name: str
    password: str
    if_not_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class DropUser(Stmt):
    name: str
    if_exists: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Grant(Stmt):
    role: str
    space: str
    user: str
    revoke: bool = False
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ChangePassword(Stmt):
    user: str
    old: str
    new: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class KillQuery(Stmt):
    qid: str
    span: Optional[Span] = _span()


MUTATIONS = (InsertVertex, InsertEdge, DeleteVertex, DeleteEdge)
