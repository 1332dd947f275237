import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvgraph import replication as R
from kvgraph.cluster import Cluster
from kvgraph.errors import ReadOnlyCluster, UnregisteredDrainer


def _pair(p_parts=6, s_parts=4, listeners=("l1", "l2"), rf=1):
    p = Cluster(hosts=["a1", "a2", "a3"], partition_num=p_parts, name="p", replica_factor=rf)
    s = Cluster(hosts=["b1", "b2"], partition_num=s_parts, name="s")
    s.storage.read_only = True
    d = R.Drainer("d", s)
    d.register("p")
    r = R.attach_listeners(p, [d], list(listeners))
    return p, s, d, r


def _schema(p, parts=6):
    p.create_space("x", partition_num=parts)
    p.execute("USE x")
    p.execute("CREATE TAG t(a int NOT NULL)")
    p.execute("CREATE TAG INDEX ta ON t(a)")
    p.execute("CREATE EDGE e(w int)")


def _mutate(p, rng, n):
    for _ in range(n):
        i, j = rng.randrange(50), rng.randrange(50)
        roll = rng.random()
        if roll < 0.45:
            p.execute(f'INSERT VERTEX t(a) VALUES "v{i}":({rng.randrange(9)})')
        elif roll < 0.85:
            p.execute(f'INSERT EDGE e(w) VALUES "v{i}"->"v{j}"@{rng.randrange(2)}:({rng.randrange(99)})')
        elif roll < 0.93:
            p.execute(f'DELETE EDGE e "v{i}"->"v{j}"@0')
        else:
            p.execute(f'DELETE VERTEX "v{i}" WITH EDGE')


def test_round_robin_assignment_120_parts():
    p = Cluster(hosts=["a1"], partition_num=120, name="p")
    s = Cluster(hosts=["b1"], name="s")
    d = R.Drainer("d", s)
    d.register("p")
    r = R.attach_listeners(p, [d], ["l1", "l2", "l3"])
    p.create_space("big", partition_num=120)
    data = Counter(lane.host for src, lane in r.lanes.items() if src != R.META)
    assert data == {"l1": 40, "l2": 40, "l3": 40}


def test_listener_hosts_spread_over_drainers():
    p = Cluster(hosts=["a1"], partition_num=4, name="p")
    drainers = [R.Drainer(f"d{i}", Cluster(hosts=["b1"], name=f"s{i}")) for i in range(2)]
    for d in drainers:
        d.register("p")
    r = R.attach_listeners(p, drainers, ["l1", "l2", "l3", "l4"])
    assert [r.host_drainer[h].name for h in ["l1", "l2", "l3", "l4"]] == ["d0", "d1", "d0", "d1"]


def test_unregistered_drainer_rejected():
    p = Cluster(hosts=["a1"], name="p")
    d = R.Drainer("d", Cluster(hosts=["b1"], name="s"))
    with pytest.raises(UnregisteredDrainer):
        R.attach_listeners(p, [d], ["l1"])


def test_fresh_clusters_converge():
    p, s, d, r = _pair()
    R.sync([r])
    assert R.verify_convergence(p, s).converged


def test_heterogeneous_partition_counts_converge():
    p, s, d, r = _pair(p_parts=6, s_parts=4)
    d.partition_num = 4
    _schema(p)
    _mutate(p, random.Random(1), 200)
    R.sync([r])
    assert s.meta.catalog.space("x").space.partition_num == 4
    assert R.verify_convergence(p, s).converged
    assert s.state_hash("x") == p.state_hash("x")


def test_secondary_is_read_only_to_clients():
    p, s, d, r = _pair()
    _schema(p)
    R.sync([r])
    s.execute("USE x")
    with pytest.raises(ReadOnlyCluster):
        s.execute('INSERT VERTEX t(a) VALUES "z":(1)')
    with pytest.raises(ReadOnlyCluster):
        s.execute("CREATE TAG q(a int)")
    assert s.execute("LOOKUP ON t YIELD id(vertex) AS v").rows == []


def test_schema_shipped_before_data_even_if_data_arrives_first():
    p, s, d, r = _pair()
    _schema(p)
    p.execute('INSERT VERTEX t(a) VALUES "v1":(3)')
    for src, lane in r.lanes.items():
        if src != R.META:
            lane.handle.pump()
    d.drain_apply()
    assert d.pending() > 0  # data deferred until its space exists
    R.sync([r])
    assert R.verify_convergence(p, s).converged


def test_redelivery_is_idempotent():
    p, s, d, r = _pair()
    _schema(p)
    _mutate(p, random.Random(2), 50)
    R.sync([r])
    before = s.state_hash("x")
    src = next(src for src in r.lanes if src != R.META and d.watermark(src) > 0)
    for lsn in range(1, d.watermark(src) + 1):
        assert d.receive(R.ShipLogEntry(src, lsn, [(1, b"\x01junk", b"")]))
    d.drain_apply()
    assert s.state_hash("x") == before


def test_out_of_order_entry_is_not_acknowledged():
    d = R.Drainer("d", Cluster(hosts=["b1"], name="s"))
    src = ("data", 1, 1)
    assert not d.receive(R.ShipLogEntry(src, 2, []))
    assert d.gaps == 1


def test_listener_crash_resumes_without_gap():
    p, s, d, r = _pair()
    _schema(p)
    rng = random.Random(3)
    _mutate(p, rng, 60)
    r.pump()
    r.crash_listener("l1")
    _mutate(p, rng, 60)
    r.pump()
    r.restart_listener("l1")
    _mutate(p, rng, 20)
    R.sync([r])
    assert d.gaps == 0
    assert R.verify_convergence(p, s).converged


def test_drainer_crash_keeps_acknowledged_entries():
    p, s, d, r = _pair()
    _schema(p)
    rng = random.Random(4)
    _mutate(p, rng, 80)
    r.pump()
    pending = d.pending()
    d.crash()
    assert not d.receive(R.ShipLogEntry(R.META, 10**6, None))
    d.restart()
    assert d.pending() == pending
    _mutate(p, rng, 40)
    R.sync([r])
    assert R.verify_convergence(p, s).converged


def test_secondary_down_then_up_converges():
    p, s, d, r = _pair()
    _schema(p)
    R.sync([r])
    for h in s.config.hosts:
        s.crash_host(h)
    _mutate(p, random.Random(5), 150)
    for _ in range(3):
        r.pump()
        d.drain_apply()
    assert d.pending() > 0
    for h in s.config.hosts:
        s.restart_host(h)
    R.sync([r])
    assert R.verify_convergence(p, s).converged


def test_dropped_entry_is_pinpointed():
    p, s, d, r = _pair()
    _schema(p)
    R.sync([r])
    dropped = []

    def drop_first_data(entry):
        if entry.source != R.META and entry.payload and not dropped:
            dropped.append(entry)
            return True
        return False

    d.drop_hook = drop_first_data
    p.execute('INSERT VERTEX t(a) VALUES "lost":(7)')
    R.sync([r])
    rep = R.verify_convergence(p, s)
    assert not rep.converged and rep.catalog_equal
    [(name, diff)] = rep.diverging()
    assert name == "x" and diff["extra"] == []
    assert {tuple(m[:2]) for m in diff["missing"]} <= {("v", "lost"), ("t", "lost"), ("i", "ta")}


def test_chained_three_clusters_converge():
    p, s, d, r = _pair()
    t = Cluster(hosts=["c1"], partition_num=3, name="t")
    t.storage.read_only = True
    d2 = R.Drainer("d2", t)
    d2.register("s")
    r2 = R.attach_listeners(s, [d2], ["m1"])
    _schema(p)
    _mutate(p, random.Random(6), 150)
    R.sync([r, r2])
    assert R.verify_convergence(p, s).converged
    assert R.verify_convergence(s, t).converged
    assert t.state_hash("x") == p.state_hash("x")


@settings(max_examples=12)
@given(st.lists(st.sampled_from(["mutate", "pump", "apply", "crash_l", "restart_l", "crash_d", "restart_d"]),
                min_size=5, max_size=25), st.integers(0, 10**6))
def test_watermarks_monotone_and_converge(actions, seed):
    p, s, d, r = _pair(listeners=("l1",))
    _schema(p)
    rng = random.Random(seed)
    marks: dict = {}
    for a in actions:
        if a == "mutate":
            _mutate(p, rng, 5)
        elif a == "pump":
            r.pump()
        elif a == "apply":
            d.drain_apply()
        elif a == "crash_l":
            r.crash_listener("l1")
        elif a == "restart_l":
            r.restart_listener("l1")
        elif a == "crash_d":
            d.crash()
        elif a == "restart_d":
            if not d.up:
                d.restart()
        if d.up:
            for src, w in d.watermarks.items():
                assert w >= marks.get(src, 0)
                marks[src] = w
    r.restart_listener("l1")
    if not d.up:
        d.restart()
    R.sync([r])
    assert R.verify_convergence(p, s).converged
