"""Plan nodes and the EXPLAIN / PROFILE table renderer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from . import ast as A
from .printer import expr as expr_text

CTX = "@ctx"  # single column carrying an evaluation context dict
FRONTIER = ["@vid", "@origin"]

# nodes whose output rows are evaluation contexts rather than plain columns
CTX_KINDS = {"GetNeighbors", "GetVertexProps", "GetEdgeProps", "FullScan", "IndexScan"}


@dataclass(eq=False)
class PlanNode:
    kind: str
    deps: list = field(default_factory=list)
    args: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    types: dict = field(default_factory=dict)
    scope: Any = None  # expr.Scope used to compile this node's expressions
    body: Optional["PlanNode"] = None  # Loop body; its leaf is a LoopInput node
    id: int = -1

    def key(self) -> tuple:
        """Structural identity of the node itself (dependencies excluded)."""
        return (self.kind, tuple(sorted((k, _hashable(v)) for k, v in self.args.items())), id(self.body) if self.body else 0)

    def copy(self, **changes) -> "PlanNode":
        d = dict(kind=self.kind, deps=list(self.deps), args=dict(self.args), columns=list(self.columns),
                 types=dict(self.types), scope=self.scope, body=self.body)
        d.update(changes)
        return PlanNode(**d)

    @property
    def ctx_mode(self) -> bool:
        return self.columns == [CTX]


def _hashable(v):
    if isinstance(v, (list, tuple)):
        return tuple(_hashable(x) for x in v)
    if isinstance(v, dict):
        return tuple(sorted((k, _hashable(x)) for k, x in v.items()))
    return v


def walk(root: PlanNode):
    """Every node reachable from ``root`` (loop bodies included), each once, post-order."""
    seen: set[int] = set()
    out: list[PlanNode] = []

    def visit(n: PlanNode):
        if id(n) in seen:
            return
        seen.add(id(n))
        if n.body is not None:
            visit(n.body)
        for d in n.deps:
            visit(d)
        out.append(n)

    visit(root)
    return out


def assign_ids(root: PlanNode) -> PlanNode:
    for i, n in enumerate(walk(root)):
        n.id = i
    return root


def node_count(root: PlanNode) -> int:
    return len(walk(root))


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def describe(n: PlanNode) -> str:
    a = n.args
    k = n.kind
    parts: list[str] = []
    if k == "Start":
        if "vids" in a:
            parts.append("vids: " + ", ".join(expr_text(v) for v in a["vids"]))
        if "src" in a:
            parts.append("src: " + expr_text(a["src"]))
        if a.get("empty"):
            parts.append("empty")
    elif k == "GetNeighbors":
        parts.append("edges: " + (", ".join(a["edges"]) or "<none>"))
        parts.append("direction: " + a["direction"])
        if a.get("vertex_props"):
            parts.append("vertex props: " + ", ".join(a["vertex_props"]))
        if a.get("filter") is not None:
            parts.append("filter: " + expr_text(a["filter"]))
        if a.get("limit") is not None:
            parts.append(f"limit: {a['limit']}")
    elif k == "GetVertexProps":
        parts.append("tags: " + ", ".join(a["tags"]))
    elif k == "GetEdgeProps":
        parts.append("edge: " + a["edge"])
        parts.append("refs: " + ", ".join(
            f"{expr_text(s)}->{expr_text(d)}@{expr_text(r)}" for s, d, r in a["refs"]))
    elif k == "FullScan":
        parts.append(("edge: " if a["is_edge"] else "tag: ") + a["schema"])
    elif k == "IndexScan":
        parts.append("index: " + a["index"])
        if a["eq"]:
            parts.append("eq: " + ", ".join(expr_text(v) for v in a["eq"]))
        if a.get("range") is not None:
            lo, lo_inc, hi, hi_inc = a["range"]
            lo_s = "-inf" if lo is None else expr_text(lo)
            hi_s = "+inf" if hi is None else expr_text(hi)
            parts.append(f"range: {'[' if lo_inc and lo is not None else '('}{lo_s}, {hi_s}{']' if hi_inc and hi is not None else ')'}")
        if a.get("filter") is not None:
            parts.append("filter: " + expr_text(a["filter"]))
    elif k == "Filter":
        parts.append("condition: " + expr_text(a["cond"]))
    elif k == "Project":
        parts.append("columns: " + ", ".join(
            f"{expr_text(e)} AS {name}" if expr_text(e) != name else name for e, name in a["items"]))
    elif k in ("Sort", "TopN"):
        parts.append("order: " + ", ".join(f"{expr_text(e)} {'ASC' if asc else 'DESC'}" for e, asc in a["items"]))
        if k == "TopN":
            parts.append(f"offset: {a['offset']}, count: {a['count']}")
    elif k == "Limit":
        parts.append(f"offset: {a['offset']}, count: {a['count']}")
    elif k == "Aggregate":
        if a["keys"]:
            parts.append("group keys: " + ", ".join(expr_text(e) for e in a["keys"]))
        parts.append("items: " + ", ".join(name for _, name in a["items"]))
    elif k == "Loop":
        parts.append(f"iterations: {a['count']}")
    elif "stmt" in a:
        from .printer import stmt as stmt_text

        parts.append(stmt_text(a["stmt"]))
    return "; ".join(parts)


def render(root: PlanNode, stats: Optional[dict] = None) -> str:
    """Deterministic table, one row per node in pre-order from the root.

    With ``stats`` (node id -> {rows, time_us}) the PROFILE columns are added.
    """
    order: list[PlanNode] = []
    seen: set[int] = set()

    def visit(n: PlanNode):
        if id(n) in seen:
            return
        seen.add(id(n))
        order.append(n)
        for d in n.deps:
            visit(d)
        if n.body is not None:
            visit(n.body)

    visit(root)
    header = ["id", "name", "dependencies", "operator info"]
    if stats is not None:
        header[3:3] = ["rows", "time(us)"]
    rows = []
    for n in order:
        deps = [d.id for d in n.deps]
        if n.body is not None:
            deps_s = ",".join(map(str, deps)) + f" body:{n.body.id}"
        else:
            deps_s = ",".join(map(str, deps))
        row = [str(n.id), f"{n.kind}_{n.id}", deps_s, describe(n)]
        if stats is not None:
            s = stats.get(n.id, {})
            row[3:3] = [str(s.get("rows", 0)), str(s.get("time_us", 0))]
        rows.append(row)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(r):
        return "|" + "|".join(f" {c.ljust(w)} " for c, w in zip(r, widths)) + "|"

    return "\n".join([sep, line(header), sep] + [line(r) for r in rows] + [sep])


def plan_signature(root: PlanNode) -> str:
    """Compact nested form, handy in tests: ``Project(Filter(GetNeighbors(Start)))``."""
    inner = ",".join(plan_signature(d) for d in root.deps)
    body = f"{{{plan_signature(root.body)}}}" if root.body is not None else ""
    return f"{root.kind}{body}({inner})" if inner else f"{root.kind}{body}"


def literal_exprs(values) -> tuple:
    return tuple(A.Literal(v) for v in values)
