"""Naive (unoptimized) plans for validated statements.

GO n STEPS:  Start -> Loop(n-1){GetNeighbors -> Project(frontier)} -> DataCollect
             -> GetNeighbors -> [Filter] -> Project -> [Dedup]
LOOKUP:      FullScan -> [Filter] -> Project
FETCH:       GetVertexProps | GetEdgeProps -> Project
Everything else is a single node.
"""

from __future__ import annotations

from typing import Optional

from . import ast as A
from .expr import ANY, STRING, Scope
from .plan import CTX, FRONTIER, PlanNode, assign_ids
from .validator import Validated


def plan(v: Validated) -> PlanNode:
    return assign_ids(_plan(v))


def _plan(v: Validated) -> PlanNode:
    s = v.stmt
    inp = _plan(v.input) if v.input is not None else None
    fn = _PLANNERS.get(type(s))
    if fn is not None:
        return fn(v, inp)
    if isinstance(s, A.MUTATIONS):
        return PlanNode(type(s).__name__, args={"stmt": s, "info": v.info})
    return PlanNode(type(s).__name__, args={"stmt": s})


def _project(dep: PlanNode, v: Validated, scope: Scope) -> PlanNode:
    node = PlanNode("Project", [dep], {"items": v.info["items"]}, list(v.columns), dict(v.types), scope)
    if v.info.get("distinct"):
        node = PlanNode("Dedup", [node], {}, list(v.columns), dict(v.types))
    return node


def _start(v: Validated, inp: Optional[PlanNode], exprs_key: str, exprs) -> PlanNode:
    args = {exprs_key: tuple(exprs)}
    deps = []
    if v.info.get("per_input"):
        deps = [inp]
        args["per_input"] = True
    return PlanNode("Start", deps, args, list(FRONTIER), {"@vid": STRING, "@origin": ANY},
                    Scope(input=None if v.input is None else dict(v.input.types)))


def _go(v: Validated, inp: Optional[PlanNode]) -> PlanNode:
    info = v.info
    frontier = _start(v, inp, "vids", v.stmt.src)
    if info["steps"] > 1:
        loop_in = PlanNode("LoopInput", [], {}, list(FRONTIER), dict(frontier.types))
        body_gn = PlanNode("GetNeighbors", [loop_in], _gn_args(info, props=False), [CTX], {}, info["scope"])
        body = PlanNode("Project", [body_gn], {"items": ((A.FuncCall("id", (A.Special("$$"),)), "@vid"),),
                                                "keep_origin": True},
                        list(FRONTIER), dict(frontier.types), info["scope"])
        loop = PlanNode("Loop", [frontier], {"count": info["steps"] - 1}, list(FRONTIER), dict(frontier.types),
                        body=body)
        frontier = PlanNode("DataCollect", [loop], {}, list(FRONTIER), dict(frontier.types))
    node = PlanNode("GetNeighbors", [frontier], _gn_args(info, props=True), [CTX], {}, info["scope"])
    if info["where"] is not None:
        node = PlanNode("Filter", [node], {"cond": info["where"]}, [CTX], {}, info["scope"])
    return _project(node, v, info["scope"])


def _gn_args(info: dict, props: bool) -> dict:
    return {
        "edges": info["edges"],
        "direction": info["direction"],
        "vertex_props": info["vertex_props"] if props else (),
        "props": props,
        "filter": None,
        "limit": None,
    }


def _fetch(v: Validated, inp: Optional[PlanNode]) -> PlanNode:
    info = v.info
    deps = [inp] if info.get("per_input") else []
    in_scope = Scope(input=None if v.input is None else dict(v.input.types))
    if v.stmt.is_edge:
        node = PlanNode("GetEdgeProps", deps, {"edge": info["edge"], "refs": info["refs"],
                                               "per_input": bool(info.get("per_input"))}, [CTX], {}, in_scope)
    else:
        node = PlanNode("GetVertexProps", deps, {"tags": info["tags"], "all_tags": info["all_tags"],
                                                 "vids": tuple(info["vids"]),
                                                 "per_input": bool(info.get("per_input"))}, [CTX], {}, in_scope)
    return _project(node, v, info["scope"])


def _lookup(v: Validated, inp: Optional[PlanNode]) -> PlanNode:
    info = v.info
    node = PlanNode("FullScan", [], {"schema": info["schema"], "is_edge": info["is_edge"]}, [CTX], {}, info["scope"])
    if info["where"] is not None:
        node = PlanNode("Filter", [node], {"cond": info["where"]}, [CTX], {}, info["scope"])
    return _project(node, v, info["scope"])


def _yield(v: Validated, inp: Optional[PlanNode]) -> PlanNode:
    info = v.info
    if inp is None:
        inp = PlanNode("Start", [], {}, [], {}, Scope())
    node = inp
    if info["where"] is not None:
        node = PlanNode("Filter", [node], {"cond": info["where"]}, list(inp.columns), dict(inp.types), info["scope"])
    if info.get("aggregate"):
        node = PlanNode("Aggregate", [node], {"keys": (), "items": info["items"]}, list(v.columns), dict(v.types),
                        info["scope"])
        if info.get("distinct"):
            node = PlanNode("Dedup", [node], {}, list(v.columns), dict(v.types))
        return node
    return _project(node, v, info["scope"])


def _order_by(v: Validated, inp: PlanNode) -> PlanNode:
    return PlanNode("Sort", [inp], {"items": v.info["items"]}, list(v.columns), dict(v.types), v.info["scope"])


def _limit(v: Validated, inp: PlanNode) -> PlanNode:
    return PlanNode("Limit", [inp], {"offset": v.info["offset"], "count": v.info["count"]}, list(v.columns),
                    dict(v.types))


def _group_by(v: Validated, inp: PlanNode) -> PlanNode:
    node = PlanNode("Aggregate", [inp], {"keys": v.info["keys"], "items": v.info["items"]}, list(v.columns),
                    dict(v.types), v.info["scope"])
    if v.info.get("distinct"):
        node = PlanNode("Dedup", [node], {}, list(v.columns), dict(v.types))
    return node


_PLANNERS = {
    A.Go: _go,
    A.Fetch: _fetch,
    A.Lookup: _lookup,
    A.Yield: _yield,
    A.OrderBy: _order_by,
    A.Limit: _limit,
    A.GroupBy: _group_by,
}
