import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvgraph import codec
from kvgraph.cluster import Cluster
from kvgraph.errors import ValueTypeError
from kvgraph.storage import BOTH

import oracles as O

S = "s"


class Boom(Exception):
    pass


def _cluster(parts=6, hosts=("h1", "h2", "h3"), **kw):
    c = Cluster(hosts=list(hosts), partition_num=parts, **kw)
    c.create_space(S, partition_num=parts)
    c.execute(f"USE {S}")
    c.execute("CREATE TAG player(name string NOT NULL, age int NOT NULL)")
    c.execute("CREATE TAG team(name string)")
    c.execute("CREATE EDGE follow(degree int NOT NULL)")
    c.execute("CREATE EDGE serve(start_year int)")
    c.execute("CREATE TAG INDEX player_age ON player(age)")
    c.execute("CREATE TAG INDEX player_name_age ON player(name, age)")
    c.execute("CREATE EDGE INDEX follow_degree ON follow(degree)")
    return c


@pytest.fixture
def c():
    return _cluster()


def _keys(c, vid):
    return [k for k, _ in c.storage.scan_vertex(S, vid)]


def test_insert_writes_marker_tag_and_edge_twins(c):
    st_ = c.storage
    st_.insert_vertex(S, "50", {"player": {"name": "ta-1", "age": 30}})
    st_.insert_vertex(S, "60", {"player": {"name": "ta-2", "age": 31}})
    st_.insert_edge(S, "50", "follow", 0, "60", {"degree": 90})
    kinds = [codec.record_kind(k) for k in _keys(c, "50")]
    assert kinds == [codec.REC_VERTEX, codec.REC_TAG, codec.REC_OUT]
    kinds = [codec.record_kind(k) for k in _keys(c, "60")]
    assert kinds == [codec.REC_VERTEX, codec.REC_TAG, codec.REC_IN]
    sc = c.meta.snapshot().space(S)
    p50, p60 = O.part_of("50", 6), O.part_of("60", 6)
    assert _keys(c, "50")[0] == O.vertex_key(p50, "50")
    assert _keys(c, "50")[2] == O.edge_key(p50, "50", True, sc.edge("follow").id, 0, "60")
    assert _keys(c, "60")[2] == O.edge_key(p60, "60", False, sc.edge("follow").id, 0, "50")
    assert st_.lock_count(S) == 0


def test_reinsert_moves_index_entry(c):
    st_ = c.storage
    st_.insert_vertex(S, "v", {"player": {"name": "a", "age": 1}})
    assert st_.index_scan(S, "player_age", eq=[1]) == ["v"]
    st_.insert_vertex(S, "v", {"player": {"name": "a", "age": 2}})
    assert st_.index_scan(S, "player_age", eq=[1]) == []
    assert st_.index_scan(S, "player_age", eq=[2]) == ["v"]
    assert len(st_.index_entries(S, "player_age")) == 1


def test_if_not_exists_keeps_old_values(c):
    st_ = c.storage
    st_.insert_vertex(S, "v", {"player": {"name": "a", "age": 1}})
    st_.insert_vertex(S, "v", {"player": {"name": "b", "age": 9}}, if_not_exists=True)
    assert st_.get_vertex_props(S, ["v"])[0]["tags"]["player"] == {"name": "a", "age": 1}
    assert st_.insert_edge(S, "v", "follow", 0, "w", {"degree": 1})
    assert not st_.insert_edge(S, "v", "follow", 0, "w", {"degree": 2}, if_not_exists=True)
    assert st_.get_edge_props(S, [("v", 0, "w")], "follow")[0]["props"] == {"degree": 1}


def test_not_null_enforced(c):
    with pytest.raises(ValueTypeError):
        c.storage.insert_vertex(S, "v", {"player": {"name": "a"}})


def test_absent_vertex_and_edge_yield_nothing(c):
    assert c.storage.get_vertex_props(S, ["nope"]) == []
    assert c.storage.get_edge_props(S, [("a", 0, "b")], "follow") == []
    assert c.storage.get_neighbors(S, ["nope"]) == []


# -- TOSS -------------------------------------------------------------------

def _crash_at(step):
    def hook(s, info):
        if s == step:
            raise Boom(info)
    return hook


@pytest.mark.parametrize("step", ["locked", "in_written"])
def test_toss_interrupted_then_rolled_forward(c, step):
    st_ = c.storage
    st_.toss_fault = _crash_at(step)
    with pytest.raises(Boom) as e:
        st_.insert_edge(S, "a", "follow", 3, "b", {"degree": 7})
    st_.toss_fault = None
    info = e.value.args[0]
    assert st_.lock_count(S) == 1
    in_keys = [codec.record_kind(k) for k in _keys(c, "b")]
    assert (codec.REC_IN in in_keys) == (step == "in_written")
    assert st_.recover_toss(S, info["out_part"]) == 1
    assert st_.lock_count(S) == 0
    out = st_.get_neighbors(S, ["a"], "out")
    inn = st_.get_neighbors(S, ["b"], "in")
    assert [(r["src"], r["dst"], r["rank"], r["props"]) for r in out] == [("a", "b", 3, {"degree": 7})]
    assert [(r["src"], r["dst"], r["rank"], r["props"]) for r in inn] == [("a", "b", 3, {"degree": 7})]
    assert st_.index_scan(S, "follow_degree", eq=[7]) == [("a", 3, "b")]


def test_toss_delete_interrupted_then_rolled_forward(c):
    st_ = c.storage
    st_.insert_edge(S, "a", "follow", 0, "b", {"degree": 7})
    st_.toss_fault = _crash_at("in_written")
    with pytest.raises(Boom) as e:
        st_.delete_edge(S, "a", "follow", 0, "b")
    st_.toss_fault = None
    assert st_.recover_toss(S, e.value.args[0]["out_part"]) == 1
    assert st_.get_neighbors(S, ["a"], BOTH) == [] and st_.get_neighbors(S, ["b"], BOTH) == []
    assert st_.index_entries(S, "follow_degree") == []


def test_toss_lock_recovered_by_new_leader():
    c = Cluster(hosts=["h1", "h2", "h3"], partition_num=6, replica_factor=3)
    c.create_space(S)
    c.execute(f"USE {S}")
    c.execute("CREATE EDGE follow(degree int NOT NULL)")
    st_ = c.storage
    st_.toss_fault = _crash_at("locked")
    with pytest.raises(Boom) as e:
        st_.insert_edge(S, "a", "follow", 0, "b", {"degree": 1})
    st_.toss_fault = None
    out_part = e.value.args[0]["out_part"]
    sid = c.meta.snapshot().space(S).space.id
    g = st_.group(sid, out_part)
    old = g.leader_host()
    c.crash_host(old)
    # the first read after the leader change re-drives the lock
    assert [r["dst"] for r in st_.get_neighbors(S, ["a"])] == ["b"]
    assert st_.lock_count(S) == 0
    c.restart_host(old)


def test_edge_to_missing_vertex_is_dangling_but_readable(c):
    c.storage.insert_edge(S, "a", "follow", 0, "ghost", {"degree": 1})
    assert c.storage.get_vertex_props(S, ["ghost"]) == []
    assert [r["vid"] for r in c.storage.get_neighbors(S, ["ghost"], "in")] == ["ghost"]


# -- reads against oracles ------------------------------------------------------

def _random_graph(c, rng, n_v=40, n_e=150):
    st_ = c.storage
    vids = [f"v{i}" for i in range(n_v)]
    for v in vids:
        st_.insert_vertex(S, v, {"player": {"name": rng.choice("abc"), "age": rng.randrange(20, 40)}})
    edges = []
    for _ in range(n_e):
        et = rng.choice(["follow", "serve"])
        props = {"degree": rng.randrange(100)} if et == "follow" else {"start_year": rng.randrange(2000, 2020)}
        e = (rng.choice(vids), et, rng.randrange(-2, 3), rng.choice(vids), props)
        edges.append(e)
    st_.bulk_insert_edges(S, edges, ignore_existed_index=False)
    dedup = {(s, t, r, d): p for s, t, r, d, p in edges}
    return vids, [(s, t, r, d, p) for (s, t, r, d), p in dedup.items()]


@pytest.fixture(scope="module")
def loaded():
    c = _cluster()
    vids, edges = _random_graph(c, random.Random(5))
    return c, vids, edges


@pytest.mark.parametrize("direction", ["out", "in", BOTH])
def test_get_neighbors_matches_oracle(loaded, direction):
    c, vids, edges = loaded
    g = O.Graph(edges)
    for v in vids[:15]:
        for types in (["follow"], ["serve"], ["follow", "serve"]):
            got = Counter((r["src"], r["dst"], r["edge"], r["rank"]) for r in
                          c.storage.get_neighbors(S, [v], direction, types))
            assert got == g.go([v], 1, types, direction)


def test_pushed_filter_equals_post_filter(loaded):
    c, vids, _ = loaded
    pred = lambda r: r["props"].get("degree", 0) > 50  # noqa: E731
    rows = c.storage.get_neighbors(S, vids, "out", ["follow"])
    pushed = c.storage.get_neighbors(S, vids, "out", ["follow"], filter=pred)
    assert pushed == [r for r in rows if pred(r)]
    assert c.storage.get_neighbors(S, vids, "out", ["follow"], filter=pred, limit=3) == pushed[:3]


def test_full_scan_matches_inserted(loaded):
    c, vids, edges = loaded
    got = Counter((r["src"], r["rank"], r["dst"]) for r in c.storage.full_scan(S, "follow", True))
    assert got == Counter((s, r, d) for s, t, r, d, _ in edges if t == "follow")
    assert sorted(r["vid"] for r in c.storage.full_scan(S, "player", False)) == sorted(vids)


@settings(max_examples=60)
@given(st.integers(15, 45), st.integers(15, 45), st.booleans(), st.booleans(), st.sampled_from("abc"))
def test_index_scan_matches_filtered_full_scan(loaded, lo, hi, lo_inc, hi_inc, name):
    c, _, _ = loaded
    rows = c.storage.full_scan(S, "player", False)

    def inside(a):
        return (a > lo or (lo_inc and a == lo)) and (a < hi or (hi_inc and a == hi))

    got = sorted(c.storage.index_scan(S, "player_age", range_=(lo, lo_inc, hi, hi_inc)))
    assert got == sorted(r["vid"] for r in rows if inside(r["props"]["age"]))
    got = sorted(c.storage.index_scan(S, "player_name_age", eq=[name], range_=(lo, lo_inc, hi, hi_inc)))
    assert got == sorted(r["vid"] for r in rows if r["props"]["name"] == name and inside(r["props"]["age"]))



_short = st.text("abc", max_size=3)


@settings(max_examples=80)
@given(st.lists(st.tuples(_short, st.integers(-3, 3)), min_size=1, max_size=12), _short, _short,
       st.booleans(), st.booleans(), st.booleans())
def test_string_range_scan_includes_prefix_values(rows, lo, hi, lo_inc, hi_inc, use_hi):
    # values that are proper prefixes of a bound sort by whatever bytes follow them
    c = Cluster(hosts=["h1"], partition_num=2)
    c.create_space(S, partition_num=2)
    c.execute(f"USE {S}")
    c.execute("CREATE TAG p(name string NOT NULL, age int NOT NULL)")
    c.execute("CREATE TAG INDEX pn ON p(name)")
    c.execute("CREATE TAG INDEX pna ON p(name, age)")
    c.storage.insert_vertices(S, [(f"v{i}", {"p": {"name": n, "age": a}}) for i, (n, a) in enumerate(rows)])
    hi_ = hi if use_hi else None

    def inside(n):
        return (n > lo or (lo_inc and n == lo)) and (hi_ is None or n < hi_ or (hi_inc and n == hi_))

    want = sorted(f"v{i}" for i, (n, _) in enumerate(rows) if inside(n))
    for ix in ("pn", "pna"):
        assert sorted(c.storage.index_scan(S, ix, range_=(lo, lo_inc, hi_, hi_inc))) == want, ix


def test_edge_index_scan(loaded):
    c, _, edges = loaded
    got = sorted(c.storage.index_scan(S, "follow_degree", range_=(None, False, 10, False)))
    want = sorted((s, r, d) for s, t, r, d, p in edges if t == "follow" and p["degree"] < 10)
    assert got == want


# -- index rebuild and bulk load -----------------------------------------------

def test_rebuild_is_idempotent(loaded):
    c, _, _ = loaded
    before = c.storage.index_entries(S, "player_age")
    r1 = c.storage.rebuild_index(S, "player_age")
    r2 = c.storage.rebuild_index(S, "player_age")
    assert r1 == r2 and r1["entries"] == len(before)
    assert c.storage.index_entries(S, "player_age") == before


def test_rebuild_empty_index(c):
    assert c.storage.rebuild_index(S, "player_age")["entries"] == 0
    assert c.storage.index_entries(S, "player_age") == []


def test_bulk_then_rebuild_equals_incremental():
    rng = random.Random(9)
    verts = [(f"v{i}", {"player": {"name": rng.choice("xyz"), "age": rng.randrange(50)}}) for i in range(60)]
    edges = [(f"v{rng.randrange(60)}", "follow", rng.randrange(3), f"v{rng.randrange(60)}",
              {"degree": rng.randrange(10)}) for _ in range(200)]
    inc, bulk = _cluster(), _cluster()
    inc.storage.insert_vertices(S, verts)
    inc.storage.insert_edges(S, edges)
    bulk.storage.insert_vertices(S, verts, ignore_existed_index=True)
    bulk.storage.bulk_insert_edges(S, edges, ignore_existed_index=True)
    assert bulk.storage.index_entries(S, "player_age") == []
    for ix in ("player_age", "player_name_age", "follow_degree"):
        bulk.storage.rebuild_index(S, ix)
        assert bulk.storage.index_entries(S, ix) == inc.storage.index_entries(S, ix)
    assert bulk.state_hash(S) == inc.state_hash(S)


# -- deletes -------------------------------------------------------------------

def test_delete_vertex_with_edges_clears_both_sides(c):
    st_ = c.storage
    for v in ("a", "b", "x"):
        st_.insert_vertex(S, v, {"player": {"name": v, "age": 1}})
    st_.insert_edge(S, "a", "follow", 0, "b", {"degree": 1})
    st_.insert_edge(S, "x", "follow", 0, "a", {"degree": 2})
    st_.delete_vertex(S, "a", with_edge=True)
    assert st_.get_vertex_props(S, ["a"]) == []
    assert st_.get_neighbors(S, ["b", "x"], BOTH) == []
    assert sorted(st_.index_scan(S, "player_age", eq=[1])) == ["b", "x"]
    assert st_.index_entries(S, "follow_degree") == []


def test_delete_vertex_without_edges_keeps_edges(c):
    st_ = c.storage
    st_.insert_vertex(S, "a", {"player": {"name": "a", "age": 1}})
    st_.insert_edge(S, "a", "follow", 0, "b", {"degree": 1})
    st_.delete_vertex(S, "a")
    assert st_.get_vertex_props(S, ["a"]) == []
    assert len(st_.get_neighbors(S, ["b"], "in")) == 1


def test_delete_tags_drops_index(c):
    st_ = c.storage
    st_.insert_vertex(S, "a", {"player": {"name": "a", "age": 1}, "team": {"name": "t"}})
    st_.delete_tags(S, "a", ["player"])
    assert st_.get_vertex_props(S, ["a"])[0]["tags"] == {"team": {"name": "t"}}
    assert st_.index_entries(S, "player_age") == []


def test_read_only_rejects_writes(c):
    from kvgraph.errors import ReadOnlyCluster
    c.storage.read_only = True
    with pytest.raises(ReadOnlyCluster):
        c.storage.insert_vertex(S, "a", {"team": {"name": "t"}})
    c.storage.insert_vertex(S, "a", {"team": {"name": "t"}}, internal=True)
