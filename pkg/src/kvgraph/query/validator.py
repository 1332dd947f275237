"""Semantic checks: resolve names against the catalog, infer expression types,
expand ``OVER *``, and pre-evaluate mutation values.

``validate`` returns a ``Validated`` record per statement; for a pipe the
right-hand side's ``input`` points at the validated left-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import SemanticError, UnknownEdge, UnknownTag, ValueTypeError
from ..schema import PropertyType, build_row, coerce_value
from . import ast as A
from .expr import (
    ANY,
    STRING,
    Scope,
    agg_type,
    column_name,
    compile_expr,
    compile_predicate,
    contains_aggregate,
    eval_const,
    extract_aggregates,
)

DQL = (A.Go, A.Fetch, A.Lookup, A.Yield, A.OrderBy, A.Limit, A.GroupBy)
SPACE_FREE = (A.Use, A.CreateSpace, A.DropSpace, A.AddHosts, A.DropHosts, A.BalanceData, A.CreateUser,
              A.DropUser, A.Grant, A.ChangePassword, A.KillQuery, A.Yield, A.OrderBy, A.Limit, A.GroupBy)


@dataclass
class Validated:
    stmt: A.Stmt
    columns: list = field(default_factory=list)
    types: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    input: Optional["Validated"] = None


def validate(stmt: A.Stmt, space_catalog: Any, input_: Optional[Validated] = None) -> Validated:
    """``space_catalog`` is the current space's ``SpaceCatalog`` (None if no space is in use)."""
    if isinstance(stmt, A.Pipe):
        left = validate(stmt.left, space_catalog, input_)
        if not isinstance(stmt.right, DQL):
            raise SemanticError(f"{type(stmt.right).__name__} cannot take piped input")
        return validate(stmt.right, space_catalog, left)
    if isinstance(stmt, A.Explain):
        return Validated(stmt, ["plan"], {"plan": STRING}, {"inner": validate(stmt.stmt, space_catalog)})
    if space_catalog is None and not isinstance(stmt, SPACE_FREE + (A.Show,)):
        from ..errors import NoSpaceSelected

        raise NoSpaceSelected("no graph space selected; run USE <space> first")
    fn = _VALIDATORS.get(type(stmt))
    v = Validated(stmt, input=input_)
    if fn is not None:
        fn(v, space_catalog)
    return v


def _input_types(v: Validated) -> Optional[dict]:
    return None if v.input is None else dict(v.input.types)


def _unique_columns(names: list[str]):
    seen = set()
    for n in names:
        if n in seen:
            raise SemanticError(f"duplicate column name {n!r}; add an alias")
        seen.add(n)


def _yield_items(v: Validated, yc: Optional[A.YieldClause], scope: Scope, default: list) -> None:
    items = []
    if yc is None:
        items = default
        distinct = False
    else:
        for it in yc.items:
            if contains_aggregate(it.expr):
                raise SemanticError("aggregates are only valid in YIELD over piped input or GROUP BY")
            items.append((it.expr, column_name(it)))
        distinct = yc.distinct
    names = [n for _, n in items]
    _unique_columns(names)
    types = {}
    refs = frozenset()
    for e, n in items:
        c = compile_expr(e, scope)
        types[n] = c.type
        refs |= c.refs
    v.columns = names
    v.types = types
    v.info["items"] = tuple(items)
    v.info["distinct"] = distinct
    v.info["item_refs"] = refs


def _const_vids(exprs) -> tuple:
    out = []
    for e in exprs:
        val = eval_const(e)
        if not isinstance(val, str):
            raise ValueTypeError(f"vertex id must be a string, got {val!r}")
        out.append(val)
    return tuple(out)


def _src_exprs(v: Validated, exprs: tuple) -> None:
    """Vid expressions: constants, or ``$-`` references evaluated per input row."""
    scope = Scope(input=_input_types(v))
    for e in exprs:
        c = compile_expr(e, scope)
        if c.type not in (STRING, ANY):
            raise ValueTypeError(f"vertex id must be a string expression: {e}")
        if "input" in c.refs:
            v.info["per_input"] = True
    if not v.info.get("per_input"):
        _const_vids(exprs)  # type-check the values now
        if v.input is not None:
            # constant sources ignore the piped rows
            v.info["per_input"] = False


# ---------------------------------------------------------------------------
# DQL
# ---------------------------------------------------------------------------

def _go(v: Validated, sc) -> None:
    s: A.Go = v.stmt
    if s.steps < 1:
        raise SemanticError("GO needs at least 1 step")
    if s.over == ("*",):
        edges = tuple(e.name for e in sorted(sc.edges.values(), key=lambda d: d.id))
    else:
        edges = []
        for name in s.over:
            if name not in sc.edges:
                raise UnknownEdge(f"unknown edge type {name!r}")
            if name not in edges:
                edges.append(name)
        edges = tuple(edges)
    _src_exprs(v, s.src)
    scope = Scope(space=sc, label_kind="edge", edges=edges, vertex_props=True, input=_input_types(v))
    refs = frozenset()
    if s.where is not None:
        refs |= compile_predicate(s.where, scope).refs
    _yield_items(v, s.yield_, scope, [(A.FuncCall("id", (A.Special("$$"),)), "id($$)")])
    refs |= v.info["item_refs"]
    v.info.update(
        edges=edges,
        edge_ids=tuple(sc.edges[e].id for e in edges),
        direction=s.direction,
        steps=s.steps,
        where=s.where,
        scope=scope,
        vertex_props=tuple(w for w in ("src", "dst") if w in refs),
    )


def _fetch(v: Validated, sc) -> None:
    s: A.Fetch = v.stmt
    if s.is_edge:
        if len(s.names) != 1 or s.names == ("*",):
            raise SemanticError("FETCH on edges takes exactly one edge type")
        edge = s.names[0]
        if edge not in sc.edges:
            raise UnknownEdge(f"unknown edge type {edge!r}")
        refs = []
        for r in s.refs:
            rank = r.rank if r.rank is not None else A.Literal(0)
            refs.append((r.src, r.dst, rank))
        scope_in = Scope(input=_input_types(v))
        for src, dst, rank in refs:
            for e in (src, dst):
                c = compile_expr(e, scope_in)
                if c.type not in (STRING, ANY):
                    raise ValueTypeError(f"vertex id must be a string expression: {e}")
                if "input" in c.refs:
                    v.info["per_input"] = True
            c = compile_expr(rank, scope_in)
            if c.type not in ("int", ANY):
                raise ValueTypeError(f"rank must be an integer expression: {rank}")
            if "input" in c.refs:
                v.info["per_input"] = True
        scope = Scope(space=sc, label_kind="edge", edges=(edge,), input=_input_types(v))
        props = sc.edges[edge].latest.names
        default = [(A.LabelProp(edge, p), f"{edge}.{p}") for p in ("_src", "_dst", "_rank")]
        default += [(A.LabelProp(edge, p), f"{edge}.{p}") for p in props]
        _yield_items(v, s.yield_, scope, default)
        v.info.update(edge=edge, refs=tuple(refs), scope=scope)
        return
    if s.names == ("*",):
        tags = tuple(sorted(sc.tags))
        all_tags = True
    else:
        for t in s.names:
            if t not in sc.tags:
                raise UnknownTag(f"unknown tag {t!r}")
        tags = tuple(dict.fromkeys(s.names))
        all_tags = False
    if len(s.refs) == 1 and isinstance(s.refs[0], A.EdgeRef):
        raise SemanticError("edge reference in a vertex FETCH")
    _src_exprs(v, s.refs)
    scope = Scope(space=sc, label_kind="tag", tags=tags, has_vertex=True, input=_input_types(v))
    default = [(A.FuncCall("id", (A.Special("VERTEX"),)), "VertexID")]
    for t in tags:
        default += [(A.LabelProp(t, p), f"{t}.{p}") for p in sc.tags[t].latest.names]
    _yield_items(v, s.yield_, scope, default)
    v.info.update(tags=tags, all_tags=all_tags, vids=s.refs, scope=scope)


def _lookup(v: Validated, sc) -> None:
    s: A.Lookup = v.stmt
    if s.schema in sc.tags:
        is_edge = False
        scope = Scope(space=sc, label_kind="tag", tags=(s.schema,), has_vertex=True)
        default = [(A.FuncCall("id", (A.Special("VERTEX"),)), "VertexID")]
    elif s.schema in sc.edges:
        is_edge = True
        scope = Scope(space=sc, label_kind="edge", edges=(s.schema,))
        default = [
            (A.LabelProp(s.schema, "_src"), "SrcVID"),
            (A.LabelProp(s.schema, "_dst"), "DstVID"),
            (A.LabelProp(s.schema, "_rank"), "Ranking"),
        ]
    else:
        raise UnknownTag(f"unknown tag or edge type {s.schema!r}")
    if s.where is not None:
        compile_predicate(s.where, scope)
    _yield_items(v, s.yield_, scope, default)
    v.info.update(schema=s.schema, is_edge=is_edge, where=s.where, scope=scope)


def _row_scope(v: Validated, sc) -> Scope:
    types = _input_types(v)
    return Scope(space=sc, input=types, cols=dict(types or {}))


def _aggregate_items(v: Validated, yc: A.YieldClause, scope: Scope, keys: tuple) -> None:
    items = []
    names = []
    types = {}
    for it in yc.items:
        name = column_name(it)
        specs: list = []
        rewritten = extract_aggregates(it.expr, scope, specs)
        if not specs and keys is not None and it.expr not in keys:
            raise SemanticError(f"{name}: non-aggregated YIELD items must be GROUP BY keys")
        agg_scope = Scope(space=scope.space, input=scope.input, cols={
            **scope.cols, **{f"@agg{i}": agg_type(sp) for i, sp in enumerate(specs)}})
        types[name] = compile_expr(rewritten, agg_scope).type
        items.append((it.expr, name))
        names.append(name)
    _unique_columns(names)
    v.columns = names
    v.types = types
    v.info["items"] = tuple(items)
    v.info["distinct"] = yc.distinct


def _yield(v: Validated, sc) -> None:
    s: A.Yield = v.stmt
    scope = _row_scope(v, sc)
    if s.where is not None:
        compile_predicate(s.where, scope)
    v.info["where"] = s.where
    v.info["scope"] = scope
    if any(contains_aggregate(it.expr) for it in s.yield_.items):
        if v.input is None:
            raise SemanticError("aggregates need piped input")
        v.info["aggregate"] = True
        _aggregate_items(v, s.yield_, scope, None)
        v.info["keys"] = ()
        return
    _yield_items(v, s.yield_, scope, [])


def _need_input(v: Validated, what: str):
    if v.input is None:
        raise SemanticError(f"{what} needs piped input")


def _order_by(v: Validated, sc) -> None:
    _need_input(v, "ORDER BY")
    scope = _row_scope(v, sc)
    for e, _ in v.stmt.items:
        if contains_aggregate(e):
            raise SemanticError("aggregates are not allowed in ORDER BY")
        compile_expr(e, scope)
    v.columns, v.types = list(v.input.columns), dict(v.input.types)
    v.info.update(items=v.stmt.items, scope=scope)


def _limit(v: Validated, sc) -> None:
    _need_input(v, "LIMIT")
    if v.stmt.count < 0 or v.stmt.offset < 0:
        raise SemanticError("LIMIT offset and count must be non-negative")
    v.columns, v.types = list(v.input.columns), dict(v.input.types)
    v.info.update(offset=v.stmt.offset, count=v.stmt.count)


def _group_by(v: Validated, sc) -> None:
    _need_input(v, "GROUP BY")
    s: A.GroupBy = v.stmt
    scope = _row_scope(v, sc)
    for k in s.keys:
        if contains_aggregate(k):
            raise SemanticError("aggregates are not allowed in GROUP BY keys")
        compile_expr(k, scope)
    _aggregate_items(v, s.yield_, scope, s.keys)
    v.info.update(keys=s.keys, scope=scope, aggregate=True)


# ---------------------------------------------------------------------------
# DML
# ---------------------------------------------------------------------------

def _insert_vertex(v: Validated, sc) -> None:
    s: A.InsertVertex = v.stmt
    tag_defs = []
    for tag, props in s.tags:
        if tag not in sc.tags:
            raise UnknownTag(f"unknown tag {tag!r}")
        if len(set(props)) != len(props):
            raise SemanticError(f"duplicate property in {tag}({', '.join(props)})")
        tag_defs.append((tag, props, sc.tags[tag].latest))
    width = sum(len(p) for _, p, _ in tag_defs)
    items = []
    for vid_e, vals in s.rows:
        vid = _const_vids([vid_e])[0]
        if len(vals) != width:
            raise SemanticError(f"vertex {vid!r}: {len(vals)} values for {width} properties")
        values = [eval_const(x) for x in vals]
        tags = {}
        i = 0
        for tag, props, schema in tag_defs:
            chunk = values[i : i + len(props)]
            i += len(props)
            build_row(schema, list(props), chunk)  # raises on type mismatch
            tags[tag] = dict(zip(props, chunk))
        items.append((vid, tags))
    v.info.update(items=items, if_not_exists=s.if_not_exists, ignore_index=s.ignore_index)


def _insert_edge(v: Validated, sc) -> None:
    s: A.InsertEdge = v.stmt
    if s.edge not in sc.edges:
        raise UnknownEdge(f"unknown edge type {s.edge!r}")
    if len(set(s.props)) != len(s.props):
        raise SemanticError(f"duplicate property in {s.edge}({', '.join(s.props)})")
    schema = sc.edges[s.edge].latest
    items = []
    for ref, vals in s.rows:
        src, dst = _const_vids([ref.src, ref.dst])
        rank = _rank(ref.rank)
        if len(vals) != len(s.props):
            raise SemanticError(f"edge {src}->{dst}: {len(vals)} values for {len(s.props)} properties")
        values = [eval_const(x) for x in vals]
        build_row(schema, list(s.props), values)
        items.append((src, s.edge, rank, dst, dict(zip(s.props, values))))
    v.info.update(items=items, if_not_exists=s.if_not_exists)


def _rank(e: Optional[A.Expr]) -> int:
    if e is None:
        return 0
    r = eval_const(e)
    if not isinstance(r, int) or isinstance(r, bool):
        raise ValueTypeError(f"rank must be an integer, got {r!r}")
    coerce_value(PropertyType.INT64, r)
    return r


def _delete_vertex(v: Validated, sc) -> None:
    v.info.update(vids=_const_vids(v.stmt.vids), with_edge=v.stmt.with_edge)


def _delete_edge(v: Validated, sc) -> None:
    s: A.DeleteEdge = v.stmt
    if s.edge not in sc.edges:
        raise UnknownEdge(f"unknown edge type {s.edge!r}")
    refs = []
    for r in s.refs:
        src, dst = _const_vids([r.src, r.dst])
        refs.append((src, s.edge, _rank(r.rank), dst))
    v.info.update(refs=refs)


_VALIDATORS = {
    A.Go: _go,
    A.Fetch: _fetch,
    A.Lookup: _lookup,
    A.Yield: _yield,
    A.OrderBy: _order_by,
    A.Limit: _limit,
    A.GroupBy: _group_by,
    A.InsertVertex: _insert_vertex,
    A.InsertEdge: _insert_edge,
    A.DeleteVertex: _delete_vertex,
    A.DeleteEdge: _delete_edge,
}
