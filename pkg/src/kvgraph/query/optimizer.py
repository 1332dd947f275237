"""Cascades-style rule-based optimizer.

The plan is loaded into a memo of ``OptGroup``s; each group holds
equivalent ``OptGroupNode`` alternatives whose dependencies are groups,
never nodes.  Rules match a pattern rooted at a group node and add new
alternatives to that node's group.  Exploration repeats until no rule adds
anything (bounded by a budget), then each group keeps its best alternative:
fewest nodes first, most pushed-down work second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..errors import RuleBudgetExceeded
from ..schema import PropertyType
from . import ast as A
from .expr import EDGE_SPECIALS, Scope, compile_expr, conjoin, conjuncts
from .plan import CTX, PlanNode, assign_ids

DEFAULT_BUDGET = 1000


@dataclass(eq=False)
class OptGroup:
    id: int
    nodes: list = field(default_factory=list)
    best: Optional["OptGroupNode"] = None

    def __repr__(self):
        return f"OptGroup({self.id}, {[n.plan.kind for n in self.nodes]})"


@dataclass(eq=False)
class OptGroupNode:
    id: int
    plan: PlanNode  # the operator; its own ``deps`` field is ignored
    deps: list  # OptGroup per dependency

    @property
    def kind(self) -> str:
        return self.plan.kind


@dataclass(frozen=True)
class Pattern:
    kind: object  # str, or a tuple of accepted kinds
    children: tuple = ()

    def accepts(self, kind: str) -> bool:
        return kind == self.kind if isinstance(self.kind, str) else kind in self.kind


class Rule:
    name = "Rule"
    pattern: Pattern

    def match(self, nodes: list[OptGroupNode]) -> bool:
        return True

    def transform(self, opt: "Optimizer", nodes: list[OptGroupNode]) -> list[OptGroupNode]:
        raise NotImplementedError


class Optimizer:
    def __init__(self, rules: Optional[list[Rule]] = None, budget: int = DEFAULT_BUDGET):
        self.rules = list(DEFAULT_RULES if rules is None else rules)
        self.budget = budget
        self.groups: list[OptGroup] = []
        self._index: dict[tuple, OptGroupNode] = {}
        self._next_node = 0
        self.applied: list[str] = []

    # -- memo construction -----------------------------------------------
    def new_group(self) -> OptGroup:
        g = OptGroup(len(self.groups))
        self.groups.append(g)
        return g

    def make_node(self, plan: PlanNode, deps: list[OptGroup]) -> OptGroupNode:
        """A node for ``plan`` over ``deps``, shared with any structurally equal node."""
        key = (plan.key(), tuple(g.id for g in deps))
        got = self._index.get(key)
        if got is not None:
            return got
        n = OptGroupNode(self._next_node, plan, list(deps))
        self._next_node += 1
        self._index[key] = n
        return n

    def group_of(self, node: OptGroupNode) -> OptGroup:
        """The group holding ``node``, creating one if it is new."""
        for g in self.groups:
            if node in g.nodes:
                return g
        g = self.new_group()
        g.nodes.append(node)
        return g

    def load(self, root: PlanNode) -> OptGroup:
        memo: dict[int, OptGroup] = {}

        def visit(p: PlanNode) -> OptGroup:
            if id(p) in memo:
                return memo[id(p)]
            deps = [visit(d) for d in p.deps]
            g = self.new_group()
            n = self.make_node(p, deps)
            g.nodes.append(n)
            memo[id(p)] = g
            return g

        return visit(root)

    # -- exploration -----------------------------------------------------
    def _bindings(self, pattern: Pattern, node: OptGroupNode):
        if not pattern.accepts(node.kind):
            return
        if not pattern.children:
            yield [node]
            return
        if len(pattern.children) != len(node.deps):
            return

        def rec(i):
            if i == len(pattern.children):
                yield []
                return
            for alt in list(node.deps[i].nodes):
                for b in self._bindings(pattern.children[i], alt):
                    for rest in rec(i + 1):
                        yield b + rest

        for tail in rec(0):
            yield [node] + tail

    def explore(self):
        applied = 0
        seen: set[tuple] = set()
        changed = True
        while changed:
            changed = False
            for g in list(self.groups):
                for node in list(g.nodes):
                    for rule in self.rules:
                        for binding in list(self._bindings(rule.pattern, node)):
                            sig = (rule.name, tuple(n.id for n in binding))
                            if sig in seen:
                                continue
                            seen.add(sig)
                            if not rule.match(binding):
                                continue
                            added = False
                            for alt in rule.transform(self, binding):
                                if alt not in g.nodes:
                                    g.nodes.append(alt)
                                    added = True
                            if added:
                                applied += 1
                                self.applied.append(rule.name)
                                changed = True
                                if applied > self.budget:
                                    raise RuleBudgetExceeded(f"more than {self.budget} rule applications")

    # -- selection -------------------------------------------------------
    def _cost(self, g: OptGroup, memo: dict, stack: set) -> tuple:
        if g.id in memo:
            return memo[g.id]
        stack = stack | {g.id}
        best = None
        for n in g.nodes:
            if any(d.id in stack for d in n.deps):
                continue
            count, pushed = 1, pushed_work(n.plan)
            for d in n.deps:
                c, p = self._cost(d, memo, stack)
                count += c
                pushed += p
            if n.plan.body is not None:
                from .plan import node_count

                count += node_count(n.plan.body)
            cand = (count, pushed)
            if best is None or (cand[0], -cand[1]) < (best[0], -best[1]):
                best = cand
                g.best = n
        memo[g.id] = best
        return best

    def extract(self, root: OptGroup) -> PlanNode:
        self._cost(root, {}, set())
        built: dict[int, PlanNode] = {}

        def build(g: OptGroup) -> PlanNode:
            if g.id in built:
                return built[g.id]
            n = g.best
            for d in n.deps:
                if d.best is None:
                    self._cost(d, {}, set())
            p = n.plan.copy(deps=[build(d) for d in n.deps])
            built[g.id] = p
            return p

        return assign_ids(build(root))

    def optimize(self, root: PlanNode) -> PlanNode:
        g = self.load(root)
        self.explore()
        return self.extract(g)


def pushed_work(p: PlanNode) -> int:
    a = p.args
    if p.kind == "GetNeighbors":
        return (a.get("filter") is not None) + (a.get("limit") is not None)
    if p.kind == "IndexScan":
        return 1 + (a.get("filter") is not None)
    if p.kind == "TopN":
        return 1
    return 0


def optimize(root: PlanNode, rules: Optional[list[Rule]] = None, budget: int = DEFAULT_BUDGET) -> PlanNode:
    """Optimized plan; falls back to ``root`` if the rule budget runs out."""
    try:
        return Optimizer(rules, budget).optimize(root)
    except RuleBudgetExceeded:
        return root


# ---------------------------------------------------------------------------
# index choice
# ---------------------------------------------------------------------------

@dataclass
class IndexChoice:
    index: object  # IndexDef
    eq: tuple
    range: Optional[tuple]  # (lo, lo_inclusive, hi, hi_inclusive)
    used: tuple  # indices of consumed conjuncts
    rule_class: int  # 1 single-field index, 2 composite prefix of one, 3 composite with two or more


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "=="}


def _const_value(e: A.Expr):
    """(True, value) for a row-independent expression, else (False, None)."""
    try:
        c = compile_expr(e, Scope())
    except Exception:
        return False, None
    try:
        return True, c.fn({})
    except Exception:
        return False, None


def _index_value(ptype: PropertyType, v):
    """``v`` converted for comparison against an index field, or None if unusable."""
    if v is None:
        return None
    if isinstance(v, bool):
        return v if ptype is PropertyType.BOOL else None
    if ptype is PropertyType.INT64:
        return v if isinstance(v, int) and -(1 << 63) <= v < (1 << 63) else None
    if ptype is PropertyType.DOUBLE:
        if isinstance(v, (int, float)) and not (isinstance(v, float) and math.isnan(v)):
            return float(v)
        return None
    if ptype is PropertyType.STRING:
        return v if isinstance(v, str) else None
    if ptype is PropertyType.DATE:
        import datetime as dt

        return v if isinstance(v, dt.date) and not isinstance(v, dt.datetime) else None
    if ptype is PropertyType.DATETIME:
        import datetime as dt

        return v if isinstance(v, dt.datetime) else None
    return None


def comparisons(preds: list[A.Expr], schema: str, schema_def) -> list[Optional[tuple]]:
    """Per conjunct: ``(prop, op, value)`` if it compares a property of ``schema`` with a constant."""
    out = []
    for p in preds:
        item = None
        if isinstance(p, A.Binary) and p.op in _FLIP:
            for lhs, rhs, op in ((p.left, p.right, p.op), (p.right, p.left, _FLIP[p.op])):
                if isinstance(lhs, A.LabelProp) and lhs.label == schema and lhs.prop not in EDGE_SPECIALS:
                    ok, val = _const_value(rhs)
                    pdef = schema_def.latest.prop(lhs.prop)
                    if ok and pdef is not None:
                        iv = _index_value(pdef.type, val)
                        if iv is not None:
                            item = (lhs.prop, op, iv)
                    break
        out.append(item)
    return out


def choose_index(preds: list[A.Expr], indexes: list, schema: str, schema_def) -> Optional[IndexChoice]:
    """Pick an index for the conjunctive predicate list, or None for a full scan.

    Rule classes are tried in order: a single-field index, a composite index
    used through a one-field prefix, then a composite index used through two
    or more fields.  Within a class the longest equality prefix wins, then
    the lowest index id.
    """
    comps = comparisons(preds, schema, schema_def)
    best: Optional[IndexChoice] = None
    for ix in indexes:
        eq, used = [], []
        for f in ix.fields:
            hit = next((i for i, c in enumerate(comps) if c and c[0] == f and c[1] == "==" and i not in used), None)
            if hit is None:
                break
            # every equality on this field is consumed; conflicting values just match nothing
            vals = {comps[i][2] for i, c in enumerate(comps) if c and c[0] == f and c[1] == "=="}
            if len(vals) > 1:
                break
            eq.append(comps[hit][2])
            used += [i for i, c in enumerate(comps) if c and c[0] == f and c[1] == "=="]
        rng = None
        if len(eq) < len(ix.fields):
            f = ix.fields[len(eq)]
            lo = hi = None
            lo_inc = hi_inc = True
            rused = []
            for i, c in enumerate(comps):
                if not c or c[0] != f or c[1] == "==":
                    continue
                _, op, v = c
                if op in (">", ">="):
                    inc = op == ">="
                    if lo is None or v > lo or (v == lo and not inc):
                        lo, lo_inc = v, inc
                else:
                    inc = op == "<="
                    if hi is None or v < hi or (v == hi and not inc):
                        hi, hi_inc = v, inc
                rused.append(i)
            if rused:
                rng = (lo, lo_inc, hi, hi_inc)
                used += rused
        usable = len(eq) + (rng is not None)
        if usable == 0:
            continue
        if len(ix.fields) == 1:
            cls = 1
        elif usable == 1:
            cls = 2
        else:
            cls = 3
        cand = IndexChoice(ix, tuple(eq), rng, tuple(sorted(used)), cls)
        if best is None or (cls, -len(eq), ix.id) < (best.rule_class, -len(best.eq), best.index.id):
            best = cand
    return best


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------

def _refs(e: A.Expr, scope) -> frozenset:
    return compile_expr(e, scope).refs


class PushFilterDownGetNeighbors(Rule):
    """Move edge-only conjuncts of a Filter into the GetNeighbors below it."""

    name = "PushFilterDownGetNeighbors"
    pattern = Pattern("Filter", (Pattern("GetNeighbors"),))

    def match(self, nodes):
        gn = nodes[1].plan
        return gn.args.get("limit") is None and gn.args.get("props", True)

    def transform(self, opt, nodes):
        flt, gn = nodes[0].plan, nodes[1].plan
        parts = conjuncts(flt.args["cond"])
        push = [c for c in parts if _refs(c, flt.scope) <= {"edge"}]
        if not push:
            return []
        keep = [c for c in parts if c not in push]
        old = gn.args.get("filter")
        new_filter = conjoin(([old] if old is not None else []) + push)
        new_gn = opt.make_node(gn.copy(args={**gn.args, "filter": new_filter}), nodes[1].deps)
        if not keep:
            return [new_gn]
        return [opt.make_node(flt.copy(args={"cond": conjoin(keep)}), [opt.group_of(new_gn)])]


class PushFilterDownIndexScan(Rule):
    name = "PushFilterDownIndexScan"
    pattern = Pattern("Filter", (Pattern("IndexScan"),))

    def transform(self, opt, nodes):
        flt, ix = nodes[0].plan, nodes[1].plan
        old = ix.args.get("filter")
        cond = flt.args["cond"] if old is None else A.Binary("AND", old, flt.args["cond"])
        return [opt.make_node(ix.copy(args={**ix.args, "filter": cond}), nodes[1].deps)]


class PushLimitDownGetNeighbors(Rule):
    """Limit over (Project over) GetNeighbors: GetNeighbors may stop after offset+count rows."""

    name = "PushLimitDownGetNeighbors"
    pattern = Pattern("Limit", (Pattern(("Project", "DataCollect", "GetNeighbors")),))

    def _chain(self, opt, nodes):
        lim, mid = nodes
        if mid.kind == "GetNeighbors":
            return lim, None, mid
        if mid.plan.args.get("keep_origin"):
            return None
        for alt in mid.deps[0].nodes:
            if alt.kind == "GetNeighbors":
                return lim, mid, alt
        return None

    def match(self, nodes):
        return self._chain(None, nodes) is not None

    def transform(self, opt, nodes):
        lim, mid, gn = self._chain(opt, nodes)
        want = lim.plan.args["offset"] + lim.plan.args["count"]
        cur = gn.plan.args.get("limit")
        if cur is not None and cur <= want:
            return []
        new_gn = opt.make_node(gn.plan.copy(args={**gn.plan.args, "limit": want}), gn.deps)
        below = opt.group_of(new_gn)
        if mid is not None:
            below = opt.group_of(opt.make_node(mid.plan, [below]))
        return [opt.make_node(lim.plan, [below])]


class MergeSortLimitToTopN(Rule):
    name = "MergeSortLimitToTopN"
    pattern = Pattern("Limit", (Pattern("Sort"),))

    def transform(self, opt, nodes):
        lim, srt = nodes[0].plan, nodes[1].plan
        top = srt.copy(kind="TopN", args={"items": srt.args["items"], "offset": lim.args["offset"],
                                          "count": lim.args["count"]})
        return [opt.make_node(top, nodes[1].deps)]


def substitute(e: A.Expr, mapping: dict) -> A.Expr:
    if isinstance(e, (A.InputProp, A.Label)):
        name = e.col if isinstance(e, A.InputProp) else e.name
        return mapping.get(name, e)
    if isinstance(e, A.Unary):
        return A.Unary(e.op, substitute(e.operand, mapping))
    if isinstance(e, A.Binary):
        return A.Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, A.ListExpr):
        return A.ListExpr(tuple(substitute(i, mapping) for i in e.items))
    if isinstance(e, A.FuncCall):
        return A.FuncCall(e.name, tuple(substitute(a, mapping) for a in e.args), e.distinct)
    return e


class CollapseAdjacentProjects(Rule):
    name = "CollapseAdjacentProjects"
    pattern = Pattern("Project", (Pattern("Project"),))

    def match(self, nodes):
        outer, inner = nodes[0].plan, nodes[1].plan
        if outer.args.get("keep_origin") or inner.args.get("keep_origin"):
            return False
        names = [n for _, n in inner.args["items"]]
        if len(set(names)) != len(names):
            return False
        return all(_refs(e, outer.scope) <= {"input", "cols"} for e, _ in outer.args["items"])

    def transform(self, opt, nodes):
        outer, inner = nodes[0].plan, nodes[1].plan
        mapping = {n: e for e, n in inner.args["items"]}
        items = tuple((substitute(e, mapping), n) for e, n in outer.args["items"])
        merged = outer.copy(args={"items": items}, scope=inner.scope)
        return [opt.make_node(merged, nodes[1].deps)]


class RemoveNoopProject(Rule):
    name = "RemoveNoopProject"
    pattern = Pattern("Project")

    def match(self, nodes):
        p = nodes[0]
        if p.plan.args.get("keep_origin") or not p.deps:
            return False
        child_cols = p.deps[0].nodes[0].plan.columns
        if child_cols == [CTX]:
            return False
        items = p.plan.args["items"]
        if len(items) != len(child_cols):
            return False
        for (e, name), col in zip(items, child_cols):
            ref = e.col if isinstance(e, A.InputProp) else e.name if isinstance(e, A.Label) else None
            if ref != col or name != col:
                return False
        return True

    def transform(self, opt, nodes):
        return list(nodes[0].deps[0].nodes)


class IndexScanSelection(Rule):
    """Filter over FullScan becomes IndexScan (plus a residual Filter) when an index fits."""

    name = "IndexScanSelection"
    pattern = Pattern("Filter", (Pattern("FullScan"),))

    def transform(self, opt, nodes):
        flt, scan = nodes[0].plan, nodes[1].plan
        sc = scan.scope.space
        schema, is_edge = scan.args["schema"], scan.args["is_edge"]
        preds = conjuncts(flt.args["cond"])
        choice = choose_index(preds, sc.indexes_on(schema, is_edge), schema, sc.schema(schema, is_edge))
        if choice is None:
            return []
        rng = choice.range
        if rng is not None:
            rng = (None if rng[0] is None else A.Literal(rng[0]), rng[1],
                   None if rng[2] is None else A.Literal(rng[2]), rng[3])
        ix_plan = scan.copy(kind="IndexScan", args={
            "schema": schema, "is_edge": is_edge, "index": choice.index.name,
            "eq": tuple(A.Literal(v) for v in choice.eq), "range": rng, "filter": None,
        })
        ix = opt.make_node(ix_plan, [])
        rest = [p for i, p in enumerate(preds) if i not in choice.used]
        if not rest:
            return [ix]
        return [opt.make_node(flt.copy(args={"cond": conjoin(rest)}), [opt.group_of(ix)])]


class EliminateEmptyLoop(Rule):
    """A zero-iteration Loop is its input; a GetNeighbors over no edge types yields nothing."""

    name = "EliminateEmptyLoop"
    pattern = Pattern(("Loop", "GetNeighbors"))

    def match(self, nodes):
        p = nodes[0].plan
        if p.kind == "Loop":
            return p.args["count"] == 0
        return not p.args["edges"]

    def transform(self, opt, nodes):
        n = nodes[0]
        if n.plan.kind == "Loop":
            return list(n.deps[0].nodes)
        empty = PlanNode("Start", [], {"empty": True}, [CTX], {}, n.plan.scope)
        return [opt.make_node(empty, [])]


DEFAULT_RULES: list[Rule] = [
    PushFilterDownGetNeighbors(),
    PushFilterDownIndexScan(),
    PushLimitDownGetNeighbors(),
    MergeSortLimitToTopN(),
    CollapseAdjacentProjects(),
    RemoveNoopProject(),
    IndexScanSelection(),
    EliminateEmptyLoop(),
]
