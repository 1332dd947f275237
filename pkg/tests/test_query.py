import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvgraph import bench
from kvgraph.cluster import Cluster
from kvgraph.errors import (KilledError, NoSpaceSelected, PermissionDenied, QuerySyntaxError, UnknownEdge,
                            UnknownProperty, UnknownTag, ValueTypeError)
from kvgraph.query import ast as A
from kvgraph.query import printer
from kvgraph.query.optimizer import choose_index, optimize
from kvgraph.query.parser import parse, parse_expr
from kvgraph.query.plan import render, walk
from kvgraph.query.planner import plan
from kvgraph.query.validator import validate

import graphs as G
import oracles as O


@pytest.fixture(scope="module")
def world():
    rng = random.Random(3)
    c = G.new_cluster()
    verts, edges = G.random_graph(rng)
    G.load(c, verts, edges)
    return c, verts, edges


def _sc(c):
    return c.meta.snapshot().space(G.SPACE)


def _naive(c, text):
    return plan(validate(parse(text), _sc(c)))


def _kinds(root):
    return [n.kind for n in walk(root)]


# -- parser ------------------------------------------------------------------

def test_parse_go_piped_into_count():
    s = parse('GO 2 STEPS FROM "p-1" OVER * YIELD DST(EDGE) | YIELD COUNT(*)')
    assert isinstance(s, A.Pipe)
    assert isinstance(s.left, A.Go) and s.left.steps == 2
    assert isinstance(s.right, A.Yield)


@pytest.mark.parametrize("text", ["", "   ", "-- only a comment"])
def test_empty_input_is_syntax_error(text):
    with pytest.raises(QuerySyntaxError):
        parse(text)


def test_syntax_error_carries_position_and_expected():
    with pytest.raises(QuerySyntaxError) as e:
        parse('GO FROM "a" OVER follow\n YIELD ,')
    assert (e.value.line, e.value.column) == (2, 8)
    assert e.value.expected
    with pytest.raises(QuerySyntaxError) as e:
        parse("FROB x")
    assert "GO" in e.value.expected


def test_spans_do_not_affect_equality():
    a = parse('GO FROM "a" OVER follow YIELD dst(EDGE) AS d')
    b = parse('GO  FROM "a"\nOVER follow   YIELD dst(EDGE) AS d')
    assert a == b and a.yield_.items[0].expr.span != b.yield_.items[0].expr.span


ROUND_TRIP = G.CORPUS + [
    "CREATE SPACE IF NOT EXISTS x(partition_num=10, replica_factor=3, vid_type=FIXED_STRING(16))",
    "DROP SPACE IF EXISTS x",
    "USE g",
    "CREATE TAG IF NOT EXISTS t(a string NOT NULL DEFAULT \"x\", b int, c double, d bool, e date, f datetime)",
    "CREATE EDGE e()",
    "ALTER TAG t ADD (g int), DROP (b)",
    "DROP EDGE IF EXISTS e",
    "CREATE TAG INDEX i ON t(a, b)",
    "REBUILD TAG INDEX i",
    "DROP TAG INDEX i",
    'INSERT VERTEX IF NOT EXISTS t(a, b) VALUES "v":("x\\"y", 1), "w":("z", -2)',
    'INSERT EDGE e(a) VALUES "v"->"w"@-3:(1.5)',
    'INSERT VERTEX IGNORE_EXISTED_INDEX t(a) VALUES "v":("q")',
    'DELETE VERTEX "v", "w" WITH EDGE',
    'DELETE EDGE follow "a"->"b"@2, "c"->"d"',
    "SHOW SPACES",
    "SHOW TAGS",
    "DESCRIBE TAG player",
    "EXPLAIN GO FROM \"a\" OVER follow YIELD dst(EDGE) AS d",
    "PROFILE LOOKUP ON player WHERE player.age > 1 YIELD id(vertex) AS v",
    "ADD HOSTS \"h9\"",
    "BALANCE DATA",
    "CREATE USER IF NOT EXISTS ann WITH PASSWORD \"pw\"",
    "GRANT ROLE ADMIN ON g TO ann",
    "KILL QUERY \"12\"",
    "YIELD NOT (1 < 2 OR false) AND -3 != 4 AS b",
    "YIELD [1, 2, 3] AS l, NULL AS n",
]


@pytest.mark.parametrize("text", ROUND_TRIP)
def test_pretty_print_round_trip(text):
    t = parse(text)
    printed = printer.stmt(t)
    assert parse(printed) == t
    assert printer.stmt(parse(printed)) == printed


_atoms = st.one_of(
    st.integers(-(2**40), 2**40).map(str),
    st.sampled_from(['"x"', '"a b"', "true", "false", "NULL", "1.5", "$-.c", "player.age", "$$.player.name",
                     "$^.player.age", "dst(EDGE)", 'date("2020-01-02")']),
)


def _exprs():
    return st.recursive(
        _atoms,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "AND",
                                              "OR", "XOR"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            inner.map(lambda e: f"(NOT {e})"),
            inner.map(lambda e: f"-({e})"),
            st.lists(inner, max_size=3).map(lambda xs: "[" + ", ".join(xs) + "]"),
            inner.map(lambda e: f"abs({e})"),
        ),
        max_leaves=8,
    )


@given(_exprs())
def test_expression_print_parse_fixpoint(text):
    e = parse_expr(text)
    assert parse_expr(printer.expr(e)) == e


# -- validator -----------------------------------------------------------------

def test_date_value_accepted_string_rejected():
    c = Cluster(hosts=["h1"], partition_num=2)
    c.create_space("s")
    c.execute("USE s")
    c.execute("CREATE EDGE write_paper(wtime date)")
    c.execute('INSERT EDGE write_paper(wtime) VALUES "a"->"b":(date("2020-01-01"))')
    with pytest.raises(ValueTypeError):
        c.execute('INSERT EDGE write_paper(wtime) VALUES "a"->"b":("hello")')


def test_name_resolution_errors(world):
    c, _, _ = world
    with pytest.raises(UnknownEdge):
        c.execute('GO FROM "p1" OVER nope YIELD dst(EDGE) AS d')
    with pytest.raises(UnknownTag):
        c.execute('LOOKUP ON nope YIELD id(vertex) AS v')
    with pytest.raises(UnknownProperty):
        c.execute('GO FROM "p1" OVER follow YIELD follow.zzz AS z')


def test_space_required():
    c = Cluster(hosts=["h1"], partition_num=2)
    with pytest.raises(NoSpaceSelected):
        c.execute('GO FROM "a" OVER follow YIELD dst(EDGE) AS d')


def test_over_star_expands_every_edge_type():
    c = Cluster(hosts=["h1"], partition_num=2)
    c.create_space("snb", vid_len=16)
    c.execute("USE snb")
    for s in bench.schema_statements():
        c.execute(s)
    v = validate(parse('GO FROM "x" OVER * YIELD dst(EDGE) AS d'), c.meta.snapshot().space("snb"))
    gn = next(n for n in walk(plan(v)) if n.kind == "GetNeighbors")
    assert len(gn.args["edges"]) == len(bench.EDGES) == 19


# -- planner -----------------------------------------------------------------

def test_go_one_step_has_no_loop(world):
    kinds = _kinds(_naive(world[0], 'GO FROM "p1" OVER follow YIELD dst(EDGE) AS d'))
    assert "Loop" not in kinds and kinds.count("GetNeighbors") == 1


def test_go_n_steps_loops(world):
    kinds = _kinds(_naive(world[0], 'GO 3 STEPS FROM "p1" OVER follow YIELD dst(EDGE) AS d'))
    assert "Loop" in kinds and "DataCollect" in kinds


def test_naive_lookup_is_full_scan_plus_filter(world):
    kinds = _kinds(_naive(world[0], "LOOKUP ON player WHERE player.age == 3 YIELD id(vertex) AS v"))
    assert "FullScan" in kinds and "Filter" in kinds and "IndexScan" not in kinds


def test_insert_is_single_node(world):
    root = _naive(world[0], 'INSERT VERTEX team(name) VALUES "t9":("x")')
    assert _kinds(root) == ["InsertVertex"]


# -- optimizer ---------------------------------------------------------------

def test_filter_pushed_into_get_neighbors(world):
    root = optimize(_naive(world[0], 'GO FROM "p1" OVER follow WHERE follow.degree > 5 YIELD dst(EDGE) AS d'))
    kinds = _kinds(root)
    assert "Filter" not in kinds
    gn = next(n for n in walk(root) if n.kind == "GetNeighbors")
    assert gn.args.get("filter") is not None


def test_filter_on_dst_vertex_not_pushed(world):
    root = optimize(_naive(world[0], 'GO FROM "p1" OVER follow WHERE $$.player.age > 5 YIELD dst(EDGE) AS d'))
    assert "Filter" in _kinds(root)


def test_lookup_uses_index(world):
    root = optimize(_naive(world[0], "LOOKUP ON player WHERE player.age == 3 YIELD id(vertex) AS v"))
    kinds = _kinds(root)
    assert "IndexScan" in kinds and "FullScan" not in kinds and "Filter" not in kinds


def test_sort_limit_becomes_topn(world):
    text = 'GO FROM "p1" OVER follow YIELD follow.degree AS w | ORDER BY $-.w | LIMIT 2'
    kinds = _kinds(optimize(_naive(world[0], text)))
    assert "TopN" in kinds and "Sort" not in kinds


def test_optimal_plan_is_a_fixpoint(world):
    once = optimize(_naive(world[0], 'GO FROM "p1" OVER follow WHERE follow.degree > 5 YIELD dst(EDGE) AS d'))
    assert render(optimize(once)) == render(once)


def test_empty_rule_set_keeps_naive_plan(world):
    naive = _naive(world[0], "LOOKUP ON player WHERE player.age == 3 YIELD id(vertex) AS v")
    assert render(optimize(naive, rules=[])) == render(naive)


class _Ix:
    def __init__(self, id, name, fields):
        self.id, self.name, self.fields = id, name, tuple(fields)


def _choose(where, indexes, schema="player"):
    c = Cluster(hosts=["h1"], partition_num=1)
    c.create_space("s")
    c.execute("USE s")
    c.execute("CREATE TAG player(a int NOT NULL, b int NOT NULL, c int NOT NULL)")
    sdef = c.meta.snapshot().space("s").tag("player")
    preds = [parse_expr(p) for p in where]
    return choose_index(preds, indexes, schema, sdef)


def test_choose_index_rule_order():
    ia, iab, ib = _Ix(1, "ia", ["a"]), _Ix(2, "iab", ["a", "b"]), _Ix(3, "ib", ["b"])
    # single-property comparison on a single-field index beats a composite
    assert _choose(["player.a == 1"], [iab, ia]).index is ia
    # no single-field index: composite prefix
    got = _choose(["player.a == 1"], [iab])
    assert got.index is iab and got.rule_class == 2 and got.range is None
    # composite equality + range
    got = _choose(["player.a == 1", "player.b < 5"], [iab])
    assert got.rule_class == 3 and got.eq == (1,) and got.range == (None, True, 5, False)
    # predicate on an unindexed field falls back to a full scan
    assert _choose(["player.c == 1"], [ia, iab, ib]) is None
    # ties break by lowest index id
    assert _choose(["player.b == 1"], [ib, _Ix(0, "ib0", ["b"])]).index.name == "ib0"


# -- execution ---------------------------------------------------------------

@pytest.mark.parametrize("steps", [1, 2, 3])
@pytest.mark.parametrize("direction,kw", [("out", ""), ("in", " REVERSELY"), ("both", " BIDIRECT")])
def test_go_matches_walk_oracle(world, steps, direction, kw):
    c, verts, edges = world
    g = O.Graph(edges)
    for seed in ["p0", "p3", "p7", "p11"]:
        rs = c.execute(f'GO {steps} STEPS FROM "{seed}" OVER follow{kw} '
                       f"YIELD src(EDGE) AS s, dst(EDGE) AS d, rank(EDGE) AS r")
        got = Counter((s, d, "follow", r) for s, d, r in rs.rows)
        assert got == g.go([seed], steps, ["follow"], direction)


def test_two_hop_count_on_path_graph():
    c = G.new_cluster()
    c.storage.insert_edges(G.SPACE, [(f"p{i}", "follow", 0, f"p{i + 1}", {"degree": 1}) for i in range(5)])
    assert c.execute('GO 2 STEPS FROM "p0" OVER follow YIELD dst(EDGE) AS d | YIELD COUNT(*) AS n').rows == [(1,)]
    assert c.execute('GO 2 STEPS FROM "p0" OVER follow YIELD dst(EDGE) AS d').rows == [("p2",)]


def test_yield_without_storage():
    c = Cluster(hosts=["h1"], partition_num=1)
    assert c.execute("YIELD 1+1").rows == [(2,)]


@pytest.mark.parametrize("template", G.CORPUS)
def test_optimized_equals_naive(world, template):
    c, verts, _ = world
    players = sorted(v for v in verts if v.startswith("p"))
    rng = random.Random(template)
    gs = c.graph
    for _ in range(3):
        q = G.fill(template, rng, players)
        a = gs.execute(gs.default_session(), q)
        b = gs.execute(gs.default_session(), q, optimize_plan=False)
        if "ORDER BY" in q:
            assert a.rows == b.rows
        else:
            assert Counter(map(repr, a.rows)) == Counter(map(repr, b.rows))


# -- EXPLAIN / PROFILE -----------------------------------------------------------


def test_explain_golden_and_stable(world):
    q = 'GO 2 STEPS FROM "a" OVER follow WHERE follow.degree > 1 YIELD dst(EDGE) AS d'
    c = world[0]
    assert c.execute("EXPLAIN " + q).plan == G.GOLDEN_GO2
    assert G.new_cluster().execute("EXPLAIN " + q).plan == G.GOLDEN_GO2


def test_explain_does_not_execute(world):
    c = world[0]
    c.execute('EXPLAIN INSERT VERTEX team(name) VALUES "zz":("x")')
    assert c.execute('FETCH PROP ON team "zz" YIELD team.name AS n').rows == []


def test_profile_row_counts(world):
    c = world[0]
    rs = c.execute("PROFILE GO 2 STEPS FROM \"p1\" OVER follow YIELD dst(EDGE) AS d")
    lines = [ln.split("|") for ln in rs.plan.splitlines() if ln.startswith("| ") and "name" not in ln]
    rows = {cells[2].strip(): int(cells[4]) for cells in lines}
    top = max(rows, key=lambda n: int(n.rsplit("_", 1)[1]))
    assert top.startswith("Project") and rows[top] == len(rs.rows)
    gn = max((n for n in rows if n.startswith("GetNeighbors")), key=lambda n: int(n.rsplit("_", 1)[1]))
    assert rows[gn] >= rows[top]


# -- kill and permissions --------------------------------------------------------

def test_kill_between_nodes(world):
    c = world[0]

    def hook(node):
        for qid in list(c.meta.running):
            c.meta.kill_query(qid)

    c.graph.on_node = hook
    try:
        with pytest.raises(KilledError):
            c.execute('GO 2 STEPS FROM "p1" OVER follow YIELD dst(EDGE) AS d')
    finally:
        c.graph.on_node = None
    assert c.execute("YIELD 1 AS x").rows == [(1,)]


def test_user_role_cannot_run_ddl(world):
    c = world[0]
    c.execute('CREATE USER IF NOT EXISTS bob WITH PASSWORD "pw"')
    s = c.graph.open_session("bob", "pw")
    c.graph.execute(s, f"USE {G.SPACE}")
    assert c.graph.execute(s, 'FETCH PROP ON player "p1" YIELD player.age AS a').columns == ["a"]
    with pytest.raises(PermissionDenied):
        c.graph.execute(s, "CREATE TAG x(a int)")
    with pytest.raises(PermissionDenied):
        c.graph.execute(s, "CREATE SPACE y")


@settings(max_examples=25)
@given(st.integers(0, 10**6))
def test_random_corpus_statements_sound(seed):
    rng = random.Random(seed)
    c = G.new_cluster(parts=3, hosts=("h1",))
    verts, edges = G.random_graph(rng, n_players=12, n_teams=3, n_follow=30, n_serve=10)
    G.load(c, verts, edges)
    players = sorted(v for v in verts if v.startswith("p"))
    gs = c.graph
    for template in rng.sample(G.CORPUS, 5):
        q = G.fill(template, rng, players)
        a = gs.execute(gs.default_session(), q).rows
        b = gs.execute(gs.default_session(), q, optimize_plan=False).rows
        assert (a == b) if "ORDER BY" in q else Counter(map(repr, a)) == Counter(map(repr, b))
