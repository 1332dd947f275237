"""Plan execution.

Each node consumes the DataSets of its dependencies and produces one.
Storage-touching nodes call the storage service, which fans out per
partition.  The kill flag is checked before every node and on every loop
iteration.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .. import codec
from ..errors import ExecutionError, KilledError, ValueTypeError
from . import ast as A
from .expr import (
    AggSpec,
    Scope,
    agg_type,
    compile_expr,
    extract_aggregates,
    hashable,
    run_aggregate,
    sort_key,
    truthy,
)
from .plan import CTX, PlanNode


@dataclass
class DataSet:
    columns: list
    rows: list = field(default_factory=list)

    def __post_init__(self):
        width = len(self.columns)
        for r in self.rows:
            if len(r) != width:
                raise ExecutionError(f"row arity {len(r)} does not match {width} columns")

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass
class ExecContext:
    storage: Any
    space: Optional[str]
    part_of: Optional[Callable] = None  # vid -> partition; NUL-padded vids sort like their raw bytes
    is_killed: Callable[[], bool] = lambda: False
    on_node: Optional[Callable[[PlanNode], None]] = None  # test hook, called before each node runs
    admin: Optional[Callable[[PlanNode], DataSet]] = None
    profile: bool = False
    stats: dict = field(default_factory=dict)


def _row_ctx(columns: list, row: tuple) -> dict:
    if columns == [CTX]:
        return row[0]
    d = dict(zip(columns, row))
    return {"input": d, "cols": d}


class Executor:
    def __init__(self, ctx: ExecContext):
        self.ctx = ctx
        self._compiled: dict[tuple, Any] = {}
        self._loop_input: dict[int, DataSet] = {}

    def run(self, root: PlanNode) -> DataSet:
        return self._run(root, {})

    def _check_killed(self):
        if self.ctx.is_killed():
            raise KilledError("query was killed")

    def _run(self, node: PlanNode, memo: dict) -> DataSet:
        if id(node) in memo:
            return memo[id(node)]
        inputs = [self._run(d, memo) for d in node.deps]
        if self.ctx.on_node is not None:
            self.ctx.on_node(node)
        self._check_killed()
        t0 = time.perf_counter()
        out = getattr(self, "_x_" + node.kind, self._x_admin)(node, inputs)
        st = self.ctx.stats.setdefault(node.id, {"rows": 0, "time_us": 0, "calls": 0})
        st["rows"] += len(out.rows)
        st["time_us"] += int((time.perf_counter() - t0) * 1e6)
        st["calls"] += 1
        memo[id(node)] = out
        return out

    def _fn(self, node: PlanNode, e: A.Expr, scope: Optional[Scope] = None):
        key = (id(node), e)
        f = self._compiled.get(key)
        if f is None:
            f = compile_expr(e, scope or node.scope).fn
            self._compiled[key] = f
        return f

    # -- sources ---------------------------------------------------------
    def _eval_sources(self, node: PlanNode, exprs, inputs) -> list[tuple]:
        """``(values, origin)`` pairs: one per input row when per-input, else one."""
        fns = [self._fn(node, e) for e in exprs]
        if node.args.get("per_input"):
            ds = inputs[0]
            out = []
            for r in ds.rows:
                c = _row_ctx(ds.columns, r)
                out.append(([f(c) for f in fns], c["input"]))
            return out
        return [([f({}) for f in fns], {})]

    def _x_Start(self, node, inputs):
        if node.args.get("empty"):
            return DataSet(list(node.columns), [])
        if "vids" not in node.args:
            return DataSet([], [()])
        rows = []
        for vals, origin in self._eval_sources(node, node.args["vids"], inputs):
            for v in vals:
                if v is None:
                    continue
                if not isinstance(v, str):
                    raise ValueTypeError(f"vertex id must be a string, got {v!r}")
                rows.append((v, origin))
        return DataSet(list(node.columns), rows)

    def _x_LoopInput(self, node, inputs):
        return self._loop_input[id(node)]

    def _x_Loop(self, node, inputs):
        frontier = inputs[0]
        leaf = node.body
        while leaf.deps:
            leaf = leaf.deps[0]
        for _ in range(node.args["count"]):
            self._check_killed()
            self._loop_input[id(leaf)] = frontier
            frontier = self._run(node.body, {})
        return DataSet(list(node.columns), list(frontier.rows))

    def _x_DataCollect(self, node, inputs):
        return DataSet(list(node.columns), list(inputs[0].rows))

    # -- storage reads ---------------------------------------------------
    def _x_GetNeighbors(self, node, inputs):
        a = node.args
        frontier = inputs[0]
        if not a["edges"] or not frontier.rows:
            return DataSet([CTX], [])
        vids = list(dict.fromkeys(r[0] for r in frontier.rows))
        unique = len(vids) == len(frontier.rows)
        filt = None
        if a.get("filter") is not None:
            f = self._fn(node, a["filter"])

            def filt(row):
                return truthy(f({"edge": row, "$^id": row["vid"], "$$id": row["other"]}))

        limit = a.get("limit")
        srows = self.ctx.storage.get_neighbors(
            self.ctx.space, vids, a["direction"], list(a["edges"]), a.get("props", True), filt,
            limit if unique else None,
        )
        by_vid: dict = {}
        for r in srows:
            by_vid.setdefault(r["vid"], []).append(r)
        out = []
        for vid, origin in frontier.rows:
            for r in by_vid.get(vid, ()):
                out.append({"edge": r, "$^id": vid, "$$id": r["other"], "input": origin or {}})
                if limit is not None and len(out) >= limit:
                    break
            if limit is not None and len(out) >= limit:
                break
        vp = a.get("vertex_props", ())
        if "src" in vp:
            props = self._vertex_tags(list(dict.fromkeys(c["$^id"] for c in out)))
            for c in out:
                c["$^"] = props.get(c["$^id"], {})
        if "dst" in vp:
            props = self._vertex_tags(list(dict.fromkeys(c["$$id"] for c in out)))
            for c in out:
                c["$$"] = props.get(c["$$id"], {})
        return DataSet([CTX], [(c,) for c in out])

    def _vertex_tags(self, vids: list) -> dict:
        if not vids:
            return {}
        return {v["vid"]: v["tags"] for v in self.ctx.storage.get_vertex_props(self.ctx.space, vids)}

    def _x_GetVertexProps(self, node, inputs):
        a = node.args
        items = []
        for vals, origin in self._eval_sources(node, a["vids"], inputs):
            for v in vals:
                if v is None:
                    continue
                if not isinstance(v, str):
                    raise ValueTypeError(f"vertex id must be a string, got {v!r}")
                items.append((v, origin))
        vids = list(dict.fromkeys(v for v, _ in items))
        tags = None if a.get("all_tags") else list(a["tags"])
        found = {r["vid"]: r["tags"] for r in self.ctx.storage.get_vertex_props(self.ctx.space, vids, tags)} if vids else {}
        out = []
        for vid, origin in items:
            if vid in found:
                out.append(({"vertex": {"vid": vid, "tags": found[vid]}, "input": origin},))
        return DataSet([CTX], out)

    def _x_GetEdgeProps(self, node, inputs):
        a = node.args
        exprs = [e for ref in a["refs"] for e in ref]
        items = []
        for vals, origin in self._eval_sources(node, exprs, inputs):
            for i in range(0, len(vals), 3):
                src, dst, rank = vals[i : i + 3]
                if src is None or dst is None or rank is None:
                    continue
                if not isinstance(src, str) or not isinstance(dst, str):
                    raise ValueTypeError("edge endpoints must be strings")
                if not isinstance(rank, int) or isinstance(rank, bool):
                    raise ValueTypeError(f"rank must be an integer, got {rank!r}")
                items.append(((src, rank, dst), origin))
        refs = list(dict.fromkeys(r for r, _ in items))
        found = {(r["src"], r["rank"], r["dst"]): r for r in self.ctx.storage.get_edge_props(self.ctx.space, refs, a["edge"])} if refs else {}
        out = []
        for ref, origin in items:
            if ref in found:
                out.append(({"edge": found[ref], "input": origin},))
        return DataSet([CTX], out)

    def _x_FullScan(self, node, inputs):
        a = node.args
        rows = self.ctx.storage.full_scan(self.ctx.space, a["schema"], a["is_edge"])
        return DataSet([CTX], [(self._scan_ctx(a, r),) for r in rows])

    @staticmethod
    def _scan_ctx(a: dict, r: dict) -> dict:
        if a["is_edge"]:
            return {"edge": {"src": r["src"], "dst": r["dst"], "rank": r["rank"], "edge": a["schema"], "props": r["props"]}}
        return {"vertex": {"vid": r["vid"], "tags": {a["schema"]: r["props"]}}}

    def _x_IndexScan(self, node, inputs):
        a = node.args
        eq = [e.value for e in a["eq"]]
        rng = a.get("range")
        if rng is not None:
            rng = (None if rng[0] is None else rng[0].value, rng[1], None if rng[2] is None else rng[2].value, rng[3])
        st = self.ctx.storage
        ids = st.index_scan(self.ctx.space, a["index"], eq, rng)
        part_of = self.ctx.part_of
        if a["is_edge"]:
            rows = st.get_edge_props(self.ctx.space, ids, a["schema"]) if ids else []
            rows.sort(key=lambda r: (part_of(r["src"]), r["src"].encode(), codec.encode_rank(r["rank"]), r["dst"].encode()))
            ctxs = [self._scan_ctx(a, r) for r in rows]
        else:
            rows = st.get_vertex_props(self.ctx.space, ids, [a["schema"]]) if ids else []
            rows.sort(key=lambda r: (part_of(r["vid"]), r["vid"].encode()))
            ctxs = [self._scan_ctx(a, {"vid": r["vid"], "props": r["tags"][a["schema"]]}) for r in rows]
        if a.get("filter") is not None:
            f = self._fn(node, a["filter"])
            ctxs = [c for c in ctxs if truthy(f(c))]
        return DataSet([CTX], [(c,) for c in ctxs])

    # -- row operators ---------------------------------------------------
    def _x_Filter(self, node, inputs):
        ds = inputs[0]
        f = self._fn(node, node.args["cond"])
        return DataSet(list(ds.columns), [r for r in ds.rows if truthy(f(_row_ctx(ds.columns, r)))])

    def _x_Project(self, node, inputs):
        ds = inputs[0]
        fns = [self._fn(node, e) for e, _ in node.args["items"]]
        out = []
        keep_origin = node.args.get("keep_origin")
        for r in ds.rows:
            c = _row_ctx(ds.columns, r)
            vals = [f(c) for f in fns]
            if keep_origin:
                vals.append(c.get("input"))
            out.append(tuple(vals))
        return DataSet(list(node.columns), out)

    def _x_Dedup(self, node, inputs):
        ds = inputs[0]
        seen = set()
        out = []
        for r in ds.rows:
            h = tuple(hashable(v) for v in r)
            if h not in seen:
                seen.add(h)
                out.append(r)
        return DataSet(list(ds.columns), out)

    def _sorted(self, node, ds: DataSet) -> list:
        items = node.args["items"]
        fns = [(self._fn(node, e), asc) for e, asc in items]
        keyed = []
        for r in ds.rows:
            c = _row_ctx(ds.columns, r)
            keyed.append(([sort_key(f(c)) for f, _ in fns], [sort_key(v) for v in r], r))

        def cmp(x, y):
            for (a, b), (_, asc) in zip(zip(x[0], y[0]), fns):
                if a != b:
                    lt = a < b
                    return (-1 if lt else 1) if asc else (1 if lt else -1)
            # whole-row tie-break keeps the order independent of the input order
            if x[1] != y[1]:
                return -1 if x[1] < y[1] else 1
            return 0

        keyed.sort(key=functools.cmp_to_key(cmp))
        return [k[2] for k in keyed]

    def _x_Sort(self, node, inputs):
        return DataSet(list(inputs[0].columns), self._sorted(node, inputs[0]))

    def _x_TopN(self, node, inputs):
        rows = self._sorted(node, inputs[0])
        off, cnt = node.args["offset"], node.args["count"]
        return DataSet(list(inputs[0].columns), rows[off : off + cnt])

    def _x_Limit(self, node, inputs):
        off, cnt = node.args["offset"], node.args["count"]
        return DataSet(list(inputs[0].columns), inputs[0].rows[off : off + cnt])

    def _x_Aggregate(self, node, inputs):
        ds = inputs[0]
        scope: Scope = node.scope
        key_fns = [self._fn(node, k) for k in node.args["keys"]]
        groups: dict = {}
        for r in ds.rows:
            c = _row_ctx(ds.columns, r)
            k = tuple(hashable(f(c)) for f in key_fns)
            groups.setdefault(k, []).append(c)
        if not node.args["keys"] and not groups:
            groups[()] = []
        plans = []
        for e, _ in node.args["items"]:
            specs: list[AggSpec] = []
            rewritten = extract_aggregates(e, scope, specs)
            agg_scope = Scope(space=scope.space, input=scope.input, cols={
                **scope.cols, **{f"@agg{i}": agg_type(sp) for i, sp in enumerate(specs)}})
            plans.append((specs, compile_expr(rewritten, agg_scope).fn))
        out = []
        for ctxs in groups.values():
            base = ctxs[0] if ctxs else {"input": {}, "cols": {}}
            row = []
            for specs, fn in plans:
                cols = dict(base.get("cols", {}))
                for i, sp in enumerate(specs):
                    cols[f"@agg{i}"] = run_aggregate(sp, ctxs)
                row.append(fn({**base, "cols": cols}))
            out.append(tuple(row))
        return DataSet(list(node.columns), out)

    # -- statements handled by the engine --------------------------------
    def _x_admin(self, node, inputs):
        if self.ctx.admin is None:
            raise ExecutionError(f"no handler for {node.kind}")
        return self.ctx.admin(node)


def execute(root: PlanNode, ctx: ExecContext) -> DataSet:
    return Executor(ctx).run(root)
