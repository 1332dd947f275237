"""Expression typing and evaluation.

``compile_expr(e, scope)`` type-checks ``e`` against a ``Scope`` and returns
a ``Compiled`` whose ``fn(ctx)`` evaluates it.  ``ctx`` is a plain dict with
any of these keys:

* ``edge``: storage neighbor row ``{src, dst, rank, edge, props, ...}``
* ``$^`` / ``$$``: ``{tag: {prop: value}}`` of the source / neighbor vertex
* ``$^id`` / ``$$id``: their vids
* ``vertex``: ``{vid, tags: {tag: {prop: value}}}`` (FETCH / LOOKUP on tags)
* ``input``: ``{column: value}`` of the piped-in row (``$-``)
* ``cols``: ``{column: value}`` for bare labels

Null propagates through arithmetic and comparisons; AND/OR/XOR follow
three-valued logic; a filter keeps a row only when its predicate is True.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..errors import ExecutionError, SemanticError, UnknownEdge, UnknownProperty, UnknownTag, ValueTypeError
from ..schema import PropertyType
from . import ast as A
from .printer import expr as expr_text

BOOL, INT, FLOAT, STRING, DATE, DATETIME = "bool", "int", "float", "string", "date", "datetime"
LIST, NULL, ANY = "list", "null", "any"
NUMERIC = (INT, FLOAT)

_PTYPE = {
    PropertyType.BOOL: BOOL,
    PropertyType.INT64: INT,
    PropertyType.DOUBLE: FLOAT,
    PropertyType.STRING: STRING,
    PropertyType.DATE: DATE,
    PropertyType.DATETIME: DATETIME,
}

AGGREGATES = ("count", "sum", "avg", "min", "max", "collect")
EDGE_SPECIALS = {"_src": STRING, "_dst": STRING, "_rank": INT, "_type": STRING}


def ptype_name(t: PropertyType) -> str:
    return _PTYPE[t]


def value_type(v) -> str:
    if v is None:
        return NULL
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return FLOAT
    if isinstance(v, str):
        return STRING
    if isinstance(v, dt.datetime):
        return DATETIME
    if isinstance(v, dt.date):
        return DATE
    if isinstance(v, (list, tuple)):
        return LIST
    return ANY


@dataclass
class Scope:
    """What an expression may refer to.

    ``label_kind`` says whether ``name.prop`` names an edge type ("edge") or
    a tag ("tag"); ``edges`` restricts the edge types in play (GO OVER).
    """

    space: Any = None  # SpaceCatalog
    label_kind: Optional[str] = None
    edges: tuple = ()
    tags: tuple = ()  # tags in play (FETCH / LOOKUP); empty means any
    vertex_props: bool = False  # $^ / $$ allowed
    has_vertex: bool = False  # id(VERTEX) allowed
    input: Optional[dict] = None  # $- columns -> type
    cols: dict = field(default_factory=dict)  # bare labels -> type
    allow_agg: bool = False


@dataclass
class Compiled:
    fn: Callable[[dict], Any]
    type: str
    refs: frozenset  # subset of {"edge", "src", "dst", "vertex", "input", "cols"}


# ---------------------------------------------------------------------------
# runtime helpers
# ---------------------------------------------------------------------------

def truthy(v) -> bool:
    return v is True


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _comparable(a, b) -> bool:
    if _num(a) and _num(b):
        return True
    ta, tb = value_type(a), value_type(b)
    return ta == tb and ta != ANY


def compare(op: str, a, b):
    if a is None or b is None:
        return None
    if op == "==":
        return a == b if _comparable(a, b) else False
    if op == "!=":
        return a != b if _comparable(a, b) else True
    if not _comparable(a, b) or isinstance(a, (list, tuple)):
        return None
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def arith(op: str, a, b):
    if a is None or b is None:
        return None
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    if op == "+" and isinstance(a, list) and isinstance(b, list):
        return a + b
    if not (_num(a) and _num(b)):
        raise ExecutionError(f"bad operands for {op}: {a!r}, {b!r}")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise ExecutionError("division by zero")
    if op == "/":
        if isinstance(a, int) and isinstance(b, int):
            q = abs(a) // abs(b)
            return q if (a >= 0) == (b >= 0) else -q
        return a / b
    # modulo keeps the sign of the dividend
    return math.fmod(a, b) if isinstance(a, float) or isinstance(b, float) else (abs(a) % abs(b)) * (1 if a >= 0 else -1)


def logic(op: str, a, b):
    if op == "AND":
        if a is False or b is False:
            return False
        if a is None or b is None:
            return None
        return True
    if op == "OR":
        if a is True or b is True:
            return True
        if a is None or b is None:
            return None
        return False
    if a is None or b is None:
        return None
    return a != b


_TYPE_RANK = {BOOL: 0, INT: 1, FLOAT: 1, STRING: 2, DATE: 3, DATETIME: 4, LIST: 5, ANY: 6, NULL: 7}


def sort_key(v):
    """Total order used by ORDER BY: numbers < ... < Null (Null sorts last ascending)."""
    t = value_type(v)
    if t == NULL:
        return (_TYPE_RANK[NULL], 0)
    if t == LIST:
        return (_TYPE_RANK[LIST], tuple(sort_key(x) for x in v))
    if t == ANY:
        return (_TYPE_RANK[ANY], repr(v))
    return (_TYPE_RANK[t], v)


def hashable(v):
    if isinstance(v, list):
        return tuple(hashable(x) for x in v)
    return v


# ---------------------------------------------------------------------------
# functions
# ---------------------------------------------------------------------------

def _f_date(s):
    if s is None:
        return None
    if isinstance(s, dt.datetime):
        return s.date()
    if isinstance(s, dt.date):
        return s
    try:
        return dt.date.fromisoformat(s)
    except (TypeError, ValueError):
        raise ExecutionError(f"invalid date literal {s!r}") from None


def _f_datetime(s):
    if s is None:
        return None
    if isinstance(s, dt.datetime):
        return s
    try:
        return dt.datetime.fromisoformat(s)
    except (TypeError, ValueError):
        raise ExecutionError(f"invalid datetime literal {s!r}") from None


def _nullsafe(f):
    return lambda *a: None if any(x is None for x in a) else f(*a)


def _to_int(v):
    if isinstance(v, str):
        try:
            return int(v)
        except ValueError:
            return None
    return int(v)


def _to_float(v):
    try:
        return float(v)
    except ValueError:
        return None


def _to_string(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (dt.date, dt.datetime)):
        return v.isoformat()
    return str(v)


# name -> (min args, max args, result type (str or callable(arg types)), implementation)
_FUNCS: dict[str, tuple] = {
    "abs": (1, 1, lambda ts: ts[0] if ts[0] in NUMERIC else FLOAT, _nullsafe(abs)),
    "floor": (1, 1, FLOAT, _nullsafe(lambda x: float(math.floor(x)))),
    "ceil": (1, 1, FLOAT, _nullsafe(lambda x: float(math.ceil(x)))),
    "round": (1, 1, FLOAT, _nullsafe(lambda x: float(math.floor(x + 0.5)))),
    "sqrt": (1, 1, FLOAT, _nullsafe(lambda x: math.sqrt(x) if x >= 0 else None)),
    "pow": (2, 2, FLOAT, _nullsafe(lambda x, y: float(x) ** y)),
    "lower": (1, 1, STRING, _nullsafe(str.lower)),
    "upper": (1, 1, STRING, _nullsafe(str.upper)),
    "length": (1, 1, INT, _nullsafe(len)),
    "size": (1, 1, INT, _nullsafe(len)),
    "tostring": (1, 1, STRING, _nullsafe(_to_string)),
    "tointeger": (1, 1, INT, _nullsafe(_to_int)),
    "tofloat": (1, 1, FLOAT, _nullsafe(_to_float)),
    "date": (1, 1, DATE, _f_date),
    "datetime": (1, 1, DATETIME, _f_datetime),
    "coalesce": (1, 64, ANY, lambda *a: next((x for x in a if x is not None), None)),
}

_ARG_TYPES = {
    "abs": NUMERIC, "floor": NUMERIC, "ceil": NUMERIC, "round": NUMERIC, "sqrt": NUMERIC, "pow": NUMERIC,
    "lower": (STRING,), "upper": (STRING,), "length": (STRING, LIST), "size": (STRING, LIST),
    "date": (STRING, DATE, DATETIME), "datetime": (STRING, DATETIME),
}


def is_aggregate(e: A.Expr) -> bool:
    return isinstance(e, A.FuncCall) and e.name in AGGREGATES


def contains_aggregate(e: A.Expr) -> bool:
    return any(is_aggregate(x) for x in walk(e))


def walk(e):
    yield e
    if isinstance(e, A.ListExpr):
        for i in e.items:
            yield from walk(i)
    elif isinstance(e, A.Unary):
        yield from walk(e.operand)
    elif isinstance(e, A.Binary):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, A.FuncCall):
        for a in e.args:
            yield from walk(a)


def conjuncts(e: Optional[A.Expr]) -> list[A.Expr]:
    if e is None:
        return []
    if isinstance(e, A.Binary) and e.op == "AND":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def conjoin(parts: list[A.Expr]) -> Optional[A.Expr]:
    out = None
    for p in parts:
        out = p if out is None else A.Binary("AND", out, p)
    return out


def column_name(item: A.YieldItem) -> str:
    return item.alias if item.alias is not None else expr_text(item.expr)


# ---------------------------------------------------------------------------
# compiler
# ---------------------------------------------------------------------------

class Compiler:
    def __init__(self, scope: Scope):
        self.scope = scope

    def compile(self, e: A.Expr) -> Compiled:
        m = getattr(self, "_" + type(e).__name__.lower())
        return m(e)

    # -- leaves ----------------------------------------------------------
    def _literal(self, e: A.Literal) -> Compiled:
        v = e.value
        return Compiled(lambda ctx: v, value_type(v), frozenset())

    def _listexpr(self, e: A.ListExpr) -> Compiled:
        items = [self.compile(i) for i in e.items]
        fns = [c.fn for c in items]
        return Compiled(lambda ctx: [f(ctx) for f in fns], LIST, _union(items))

    def _labelprop(self, e: A.LabelProp) -> Compiled:
        sc = self.scope
        if sc.label_kind == "edge":
            if sc.edges and e.label not in sc.edges:
                raise SemanticError(f"edge {e.label!r} is not in the traversed edge types")
            sdef = _schema(sc.space, e.label, True)
            label, prop = e.label, e.prop
            if prop in EDGE_SPECIALS:
                key = prop[1:]
                if key == "type":
                    return Compiled(lambda ctx: _edge_field(ctx, label, "edge"), STRING, frozenset({"edge"}))
                return Compiled(lambda ctx: _edge_field(ctx, label, key), EDGE_SPECIALS[prop], frozenset({"edge"}))
            p = sdef.latest.prop(prop)
            if p is None:
                raise UnknownProperty(f"edge {label!r} has no property {prop!r}")

            def edge_prop(ctx):
                edge = ctx.get("edge")
                if edge is None or edge["edge"] != label or edge["props"] is None:
                    return None
                return edge["props"].get(prop)

            return Compiled(edge_prop, ptype_name(p.type), frozenset({"edge"}))
        if sc.label_kind == "tag":
            if sc.tags and e.label not in sc.tags:
                raise SemanticError(f"tag {e.label!r} is not among the fetched tags")
            sdef = _schema(sc.space, e.label, False)
            tag, prop = e.label, e.prop
            if prop == "_vid":
                return Compiled(lambda ctx: ctx["vertex"]["vid"], STRING, frozenset({"vertex"}))
            p = sdef.latest.prop(prop)
            if p is None:
                raise UnknownProperty(f"tag {tag!r} has no property {prop!r}")

            def tag_prop(ctx):
                props = ctx["vertex"]["tags"].get(tag)
                return None if props is None else props.get(prop)

            return Compiled(tag_prop, ptype_name(p.type), frozenset({"vertex"}))
        raise SemanticError(f"{expr_text(e)}: property reference outside GO/FETCH/LOOKUP")

    def _vertexprop(self, e: A.VertexProp) -> Compiled:
        if not self.scope.vertex_props:
            raise SemanticError(f"{expr_text(e)}: $^ and $$ are only valid in GO")
        sdef = _schema(self.scope.space, e.tag, False)
        p = sdef.latest.prop(e.prop)
        if p is None:
            raise UnknownProperty(f"tag {e.tag!r} has no property {e.prop!r}")
        key = "$^" if e.which == "src" else "$$"
        tag, prop = e.tag, e.prop

        def vprop(ctx):
            props = (ctx.get(key) or {}).get(tag)
            return None if props is None else props.get(prop)

        return Compiled(vprop, ptype_name(p.type), frozenset({e.which}))

    def _inputprop(self, e: A.InputProp) -> Compiled:
        cols = self.scope.input
        if cols is None:
            raise SemanticError("$- used without piped input")
        if e.col not in cols:
            raise SemanticError(f"column {e.col!r} not in piped input (have {', '.join(cols) or 'none'})")
        col = e.col
        return Compiled(lambda ctx: ctx["input"].get(col), cols[col], frozenset({"input"}))

    def _label(self, e: A.Label) -> Compiled:
        name = e.name
        if name in self.scope.cols:
            return Compiled(lambda ctx: ctx["cols"].get(name), self.scope.cols[name], frozenset({"cols"}))
        if self.scope.input is not None and name in self.scope.input:
            return Compiled(lambda ctx: ctx["input"].get(name), self.scope.input[name], frozenset({"input"}))
        raise SemanticError(f"unknown column {name!r}")

    def _special(self, e: A.Special) -> Compiled:
        if e.name in ("$$", "$^"):
            if not self.scope.vertex_props:
                raise SemanticError(f"{e.name} is only valid in GO")
            key = e.name + "id"
            return Compiled(lambda ctx: ctx.get(key), STRING, frozenset({"edge"}))
        raise SemanticError(f"{e.name} can only be used as a function argument")

    def _star(self, e: A.Star) -> Compiled:
        raise SemanticError("* is only valid in count(*)")

    # -- operators -------------------------------------------------------
    def _unary(self, e: A.Unary) -> Compiled:
        c = self.compile(e.operand)
        f = c.fn
        if e.op == "NOT":
            _expect(c.type, (BOOL,), "NOT")
            return Compiled(lambda ctx: (lambda v: None if v is None else not v)(f(ctx)), BOOL, c.refs)
        _expect(c.type, NUMERIC, "unary -")

        def neg(ctx):
            v = f(ctx)
            if v is None:
                return None
            if not _num(v):
                raise ExecutionError(f"bad operand for unary -: {v!r}")
            return -v

        return Compiled(neg, c.type, c.refs)

    def _binary(self, e: A.Binary) -> Compiled:
        lc, rc = self.compile(e.left), self.compile(e.right)
        lf, rf = lc.fn, rc.fn
        lt, rt = lc.type, rc.type
        refs = lc.refs | rc.refs
        op = e.op
        if op in ("AND", "OR", "XOR"):
            _expect(lt, (BOOL,), op)
            _expect(rt, (BOOL,), op)
            if op == "AND":
                def f(ctx):
                    a = lf(ctx)
                    return False if a is False else logic("AND", a, rf(ctx))
            elif op == "OR":
                def f(ctx):
                    a = lf(ctx)
                    return True if a is True else logic("OR", a, rf(ctx))
            else:
                def f(ctx):
                    return logic("XOR", lf(ctx), rf(ctx))
            return Compiled(f, BOOL, refs)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            if not _compatible(lt, rt):
                raise ValueTypeError(f"cannot compare {lt} with {rt} in {expr_text(e)}")
            return Compiled(lambda ctx: compare(op, lf(ctx), rf(ctx)), BOOL, refs)
        if op == "IN":
            _expect(rt, (LIST,), "IN")

            def f_in(ctx):
                a, b = lf(ctx), rf(ctx)
                if a is None or b is None:
                    return None
                return any(compare("==", a, x) is True for x in b)

            return Compiled(f_in, BOOL, refs)
        if op == "CONTAINS":
            _expect(lt, (STRING,), "CONTAINS")
            _expect(rt, (STRING,), "CONTAINS")

            def f_contains(ctx):
                a, b = lf(ctx), rf(ctx)
                return None if a is None or b is None else b in a

            return Compiled(f_contains, BOOL, refs)
        # arithmetic
        if op == "+" and (lt == STRING or rt == STRING):
            _expect(lt, (STRING,), "+")
            _expect(rt, (STRING,), "+")
            t = STRING
        elif op == "+" and (lt == LIST or rt == LIST):
            _expect(lt, (LIST,), "+")
            _expect(rt, (LIST,), "+")
            t = LIST
        else:
            _expect(lt, NUMERIC, op)
            _expect(rt, NUMERIC, op)
            if lt == FLOAT or rt == FLOAT:
                t = FLOAT
            elif lt == INT and rt == INT:
                t = INT
            else:
                t = ANY
        return Compiled(lambda ctx: arith(op, lf(ctx), rf(ctx)), t, refs)

    def _funccall(self, e: A.FuncCall) -> Compiled:
        name = e.name
        if name in AGGREGATES:
            raise SemanticError(f"aggregate {name}() is only valid in YIELD over piped input or GROUP BY")
        if name in ("id", "src", "dst", "rank", "type"):
            return self._graph_func(e)
        spec = _FUNCS.get(name)
        if spec is None:
            raise SemanticError(f"unknown function {name}()")
        lo, hi, rtype, impl = spec
        if not lo <= len(e.args) <= hi:
            raise SemanticError(f"{name}() takes {lo} argument(s), got {len(e.args)}")
        args = [self.compile(a) for a in e.args]
        allowed = _ARG_TYPES.get(name)
        if allowed:
            for a in args:
                _expect(a.type, allowed, f"{name}()")
        fns = [a.fn for a in args]
        t = rtype([a.type for a in args]) if callable(rtype) else rtype
        if len(fns) == 1:
            f0 = fns[0]
            return Compiled(lambda ctx: impl(f0(ctx)), t, _union(args))
        return Compiled(lambda ctx: impl(*[f(ctx) for f in fns]), t, _union(args))

    def _graph_func(self, e: A.FuncCall) -> Compiled:
        name = e.name
        if len(e.args) != 1 or not isinstance(e.args[0], A.Special):
            raise SemanticError(f"{name}() takes EDGE, VERTEX, $$ or $^")
        arg = e.args[0].name
        sc = self.scope
        if name == "id":
            if arg in ("$$", "$^"):
                return self._special(e.args[0])
            if arg == "VERTEX" and sc.has_vertex:
                return Compiled(lambda ctx: ctx["vertex"]["vid"], STRING, frozenset({"vertex"}))
            raise SemanticError(f"id({arg}) is not valid here")
        if arg != "EDGE" or sc.label_kind != "edge":
            raise SemanticError(f"{name}() takes EDGE in GO, FETCH or LOOKUP on edges")
        key = {"src": "src", "dst": "dst", "rank": "rank", "type": "edge"}[name]
        t = INT if name == "rank" else STRING
        return Compiled(lambda ctx: ctx["edge"][key], t, frozenset({"edge"}))


def _edge_field(ctx, label, key):
    edge = ctx.get("edge")
    if edge is None or edge["edge"] != label:
        return None
    return edge[key]


def _union(cs) -> frozenset:
    out = frozenset()
    for c in cs:
        out |= c.refs
    return out


def _schema(space, name: str, is_edge: bool):
    if space is None:
        raise SemanticError("no graph space selected")
    try:
        return space.schema(name, is_edge)
    except (UnknownTag, UnknownEdge):
        raise
    except Exception:
        raise (UnknownEdge if is_edge else UnknownTag)(f"unknown {'edge' if is_edge else 'tag'} {name!r}") from None


def _expect(t: str, allowed, what: str):
    if t in (ANY, NULL) or t in allowed:
        return
    raise ValueTypeError(f"{what}: unexpected operand type {t}")


def _compatible(a: str, b: str) -> bool:
    if ANY in (a, b) or NULL in (a, b):
        return True
    if a in NUMERIC and b in NUMERIC:
        return True
    return a == b


def compile_expr(e: A.Expr, scope: Scope) -> Compiled:
    return Compiler(scope).compile(e)


def compile_predicate(e: A.Expr, scope: Scope) -> Compiled:
    c = compile_expr(e, scope)
    _expect(c.type, (BOOL,), "WHERE")
    return c


def eval_const(e: A.Expr):
    """Evaluate an expression that must not reference any row."""
    return compile_expr(e, Scope()).fn({})


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass
class AggSpec:
    name: str
    arg: Optional[Compiled]  # None for count(*)
    distinct: bool


def agg_type(spec: AggSpec) -> str:
    if spec.name == "count":
        return INT
    if spec.name == "avg":
        return FLOAT
    if spec.name == "collect":
        return LIST
    return spec.arg.type if spec.arg else ANY


def extract_aggregates(e: A.Expr, scope: Scope, specs: list) -> A.Expr:
    """Replace each aggregate call with a ``Label("@aggN")`` placeholder."""
    if is_aggregate(e):
        if len(e.args) != 1:
            raise SemanticError(f"{e.name}() takes one argument")
        a = e.args[0]
        if isinstance(a, A.Star):
            if e.name != "count":
                raise SemanticError(f"{e.name}(*) is not valid")
            arg = None
        else:
            if contains_aggregate(a):
                raise SemanticError("nested aggregates are not allowed")
            arg = compile_expr(a, scope)
            if e.name in ("sum", "avg"):
                _expect(arg.type, NUMERIC, f"{e.name}()")
        specs.append(AggSpec(e.name, arg, e.distinct))
        return A.Label(f"@agg{len(specs) - 1}")
    if isinstance(e, A.Unary):
        return A.Unary(e.op, extract_aggregates(e.operand, scope, specs))
    if isinstance(e, A.Binary):
        return A.Binary(e.op, extract_aggregates(e.left, scope, specs), extract_aggregates(e.right, scope, specs))
    if isinstance(e, A.ListExpr):
        return A.ListExpr(tuple(extract_aggregates(i, scope, specs) for i in e.items))
    if isinstance(e, A.FuncCall):
        return A.FuncCall(e.name, tuple(extract_aggregates(a, scope, specs) for a in e.args), e.distinct)
    return e


def run_aggregate(spec: AggSpec, ctxs: list[dict]):
    if spec.arg is None:
        return len(ctxs)
    vals = [spec.arg.fn(c) for c in ctxs]
    vals = [v for v in vals if v is not None]
    if spec.distinct:
        seen, uniq = set(), []
        for v in vals:
            h = hashable(v)
            if h not in seen:
                seen.add(h)
                uniq.append(v)
        vals = uniq
    if spec.name == "count":
        return len(vals)
    if spec.name == "collect":
        return vals
    if not vals:
        return 0 if spec.name == "sum" else None
    if spec.name == "sum":
        return sum(vals)
    if spec.name == "avg":
        return sum(vals) / len(vals)
    keyed = sorted(vals, key=sort_key)
    return keyed[0] if spec.name == "min" else keyed[-1]
