import datetime as dt
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kvgraph import codec
from kvgraph.cluster import Cluster
from kvgraph.errors import (DependentIndexExists, DuplicateName, HostNotEmpty, UnknownQueryId, UnknownSpace,
                            ValueTypeError)
from kvgraph.meta import Catalog, fnv1a64, hash_part
from kvgraph.schema import PropDef, PropertyType as T

import oracles as O


@pytest.fixture
def cluster():
    return Cluster(hosts=["h1", "h2", "h3"], partition_num=6)


def test_fnv_reference_vectors():
    # published FNV-1a 64 test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


@given(st.text(st.characters(min_codepoint=1, max_codepoint=0x7F), max_size=16), st.integers(1, 500))
def test_hash_part_matches_oracle(vid, n):
    assert hash_part(vid, n, 16) == O.part_of(vid, n) == hash_part(vid, n, 16)
    assert 1 <= hash_part(vid, n, 16) <= n


def test_hash_balance_over_120_parts():
    rng = random.Random(1)
    buckets = Counter(hash_part(f"v{rng.getrandbits(48):x}", 120, 16) for _ in range(100_000))
    assert len(buckets) == 120
    assert max(buckets.values()) / min(buckets.values()) < 1.3


def test_partition_num_changes_placement():
    moved = sum(hash_part(f"v{i}", 10, 16) != hash_part(f"v{i}", 11, 16) for i in range(200))
    assert moved > 100


def test_create_space_120_parts_all_hosts(cluster):
    cluster.create_space("big", partition_num=120, replica_factor=3)
    parts = cluster.meta.catalog.part_hosts("big")
    assert len(parts) == 120
    assert all(sorted(h) == ["h1", "h2", "h3"] for h in parts.values())


def test_space_lifecycle(cluster):
    sid = cluster.create_space("s")
    with pytest.raises(DuplicateName):
        cluster.create_space("s")
    assert cluster.create_space("s", if_not_exists=True) == sid
    cluster.meta.drop_space("s")
    with pytest.raises(UnknownSpace):
        cluster.meta.describe_space("s")
    assert cluster.create_space("s2") != sid


def test_schema_ddl(cluster):
    m = cluster.meta
    cluster.create_space("s")
    m.create_edge("s", "write_paper", [PropDef("wtime", T.DATE)])
    assert m.describe_schema("s", "write_paper", True).props == (PropDef("wtime", T.DATE),)
    m.create_edge("s", "write_paper", [PropDef("wtime", T.DATE)], if_not_exists=True)
    with pytest.raises(DuplicateName):
        m.create_edge("s", "write_paper", [])
    v = m.alter_schema("s", "write_paper", True, add=[PropDef("note", T.STRING)])
    assert v == 1
    sc = m.snapshot().space("s")
    old = codec.serialize_row(sc.edge("write_paper").version(0), [dt.date(2020, 1, 1)])
    got = codec.deserialize_row(sc.edge("write_paper").version, old, sc.edge("write_paper").latest)
    assert got == {"wtime": dt.date(2020, 1, 1), "note": None}


def test_index_requires_not_null_and_blocks_drop(cluster):
    m = cluster.meta
    cluster.create_space("s")
    m.create_tag("s", "t", [PropDef("a", T.INT64, nullable=False), PropDef("b", T.INT64)])
    with pytest.raises(ValueTypeError):
        m.create_index("s", "bad", "t", False, ["b"])
    m.create_index("s", "ia", "t", False, ["a"])
    with pytest.raises(DependentIndexExists):
        m.drop_schema("s", "t", False)
    m.drop_index("s", "ia")
    m.drop_schema("s", "t", False)


def test_catalog_json_round_trip(cluster):
    m = cluster.meta
    cluster.create_space("s")
    m.create_tag("s", "t", [PropDef("a", T.INT64, nullable=False, default=3)])
    m.create_index("s", "ia", "t", False, ["a"])
    cat = m.snapshot()
    again = Catalog.from_json(cat.to_json())
    assert again.schema_digest() == cat.schema_digest()


def test_balance_three_hosts_twelve_parts():
    c = Cluster(hosts=["h1"], partition_num=12)
    c.create_space("s", partition_num=12)
    c.add_host("h2")
    c.add_host("h3")
    c.balance()
    load = Counter(h for hs in c.meta.catalog.part_hosts("s").values() for h in hs)
    assert load == {"h1": 4, "h2": 4, "h3": 4}
    c.add_host("h4")
    c.balance()
    load = Counter(h for hs in c.meta.catalog.part_hosts("s").values() for h in hs)
    assert sorted(load.values()) == [3, 3, 3, 3]


def test_balance_preserves_data():
    c = Cluster(hosts=["h1", "h2"], partition_num=8)
    c.create_space("s", partition_num=8)
    c.execute("USE s")
    c.execute("CREATE TAG t(a int)")
    c.execute("INSERT VERTEX t(a) VALUES " + ", ".join(f'"v{i}":({i})' for i in range(200)))
    before = c.state_hash("s")
    c.add_host("h3")
    c.balance()
    assert c.state_hash("s") == before
    assert c.execute("LOOKUP ON t YIELD t.a AS a | YIELD COUNT(*) AS n").rows == [(200,)]


def test_remove_sole_replica_host_refused():
    c = Cluster(hosts=["h1", "h2"], partition_num=4)
    c.create_space("s", partition_num=4, replica_factor=1)
    with pytest.raises(HostNotEmpty):
        c.remove_host("h1")


def test_kill_unknown_query(cluster):
    with pytest.raises(UnknownQueryId):
        cluster.meta.kill_query("nope")


def test_users_and_auth(cluster):
    m = cluster.meta
    m.create_user("ann", "pw")
    assert m.authenticate("ann", "pw") == "user"
    assert m.authenticate("ann", "bad") is None
    m.set_role("ann", "admin")
    assert m.authenticate("ann", "pw") == "admin"



def test_catalog_survives_rolling_crashes_with_message_loss():
    # a restarted replica replays its log lazily; it must never serve reads before that
    c = Cluster(hosts=["h1", "h2", "h3"], partition_num=2, drop=0.1, seed=1)
    c.create_space("s")
    rng = random.Random(0)
    down = None
    for _ in range(200):
        if down is not None:
            c.restart_host(down)
        down = rng.choice(["h1", "h2", "h3"])
        c.crash_host(down)
        assert c.meta.snapshot().space("s").space.name == "s"
