import pytest
from hypothesis import given
from hypothesis import strategies as st

from kvgraph import codec
from kvgraph.errors import ChecksumError, PartNotFound
from kvgraph.kvstore import OP_DELETE, OP_PUT, FileDisk, KVStore, MemoryDisk, Partition, Snapshot, read_wal

keys = st.binary(min_size=0, max_size=6)
values = st.binary(min_size=0, max_size=6)
ops = st.lists(st.one_of(st.tuples(st.just(OP_PUT), keys, values), st.tuples(st.just(OP_DELETE), keys)), max_size=60)


def apply_oracle(model: dict, op):
    if op[0] == OP_PUT:
        model[op[1]] = op[2]
    else:
        model.pop(op[1], None)


def test_put_get_delete():
    p = Partition(1, MemoryDisk(), "s/1")
    p.put(b"k", b"v")
    assert p.get(b"k") == b"v"
    p.delete(b"k")
    assert p.get(b"k") is None


def test_unknown_partition():
    kv = KVStore(MemoryDisk(), "s")
    with pytest.raises(PartNotFound):
        kv.get(3, b"k")


def test_acknowledged_write_survives_crash():
    disk = MemoryDisk()
    Partition(1, disk, "s/1").put(b"k", b"v")
    disk.crash()
    assert Partition(1, disk, "s/1").get(b"k") == b"v"


def test_unflushed_write_is_lost():
    disk = MemoryDisk()
    p = Partition(1, disk, "s/1")
    p.write_batch([(OP_PUT, b"a", b"1")])
    p.write_batch([(OP_PUT, b"b", b"2")], sync=False)
    disk.crash()
    q = Partition(1, disk, "s/1")
    assert q.get(b"a") == b"1" and q.get(b"b") is None


def test_torn_wal_tail_is_ignored():
    disk = MemoryDisk()
    p = Partition(1, disk, "s/1")
    p.put(b"a", b"1")
    p.put(b"b", b"2")
    disk.files["s/1/wal"] = disk.files["s/1/wal"][:-3]
    q = Partition(1, disk, "s/1")
    assert q.get(b"a") == b"1" and q.get(b"b") is None
    assert [seq for seq, _ in read_wal(bytes(disk.files["s/1/wal"]))] == [1]


def test_table_vertex_prefix_scan():
    p = Partition(100, MemoryDisk(), "s/100")
    p.put(codec.encode_tag_key(100, "50", 2), b"b")
    p.put(codec.encode_vertex_key(100, "50"), b"")
    p.put(codec.encode_tag_key(100, "50", 1), b"a")
    p.put(codec.encode_vertex_key(100, "51"), b"")
    got = p.scan_prefix(codec.vertex_prefix(100, "50"))
    assert [codec.decode_data_key(k) for k, _ in got] == [
        codec.VertexKey(100, "50"), codec.TagKey(100, "50", 1), codec.TagKey(100, "50", 2)]


def test_empty_scan_and_empty_checkpoint():
    p = Partition(1, MemoryDisk(), "s/1")
    assert p.scan_prefix(b"") == []
    snap = p.checkpoint()
    assert snap.items == [] and snap.last_seq == 0


def test_checkpoint_then_more_writes_then_crash():
    disk = MemoryDisk()
    p = Partition(1, disk, "s/1")
    for i in range(1000):
        p.put(b"a%04d" % i, b"x")
    p.checkpoint()
    for i in range(1000):
        p.put(b"b%04d" % i, b"y")
    before = p.state_hash()
    disk.crash()
    q = Partition(1, disk, "s/1")
    assert len(q) == 2000 and q.state_hash() == before


def test_restore_replaces_state():
    p = Partition(1, MemoryDisk(), "s/1")
    p.put(b"a", b"1")
    snap = p.checkpoint()
    other = Partition(1, MemoryDisk(), "s/1")
    other.put(b"z", b"9")
    other.restore(snap)
    assert other.items() == [(b"a", b"1")]


def test_corrupt_snapshot():
    data = bytearray(Snapshot(1, 5, [(b"k", b"v")]).to_bytes())
    data[10] ^= 0xFF
    with pytest.raises(ChecksumError):
        Snapshot.from_bytes(bytes(data))
    disk = MemoryDisk()
    disk.write_atomic("s/1/snap", bytes(data))
    with pytest.raises(ChecksumError):
        Partition(1, disk, "s/1")


def test_key_only_scan_skips_value_tier():
    p = Partition(1, MemoryDisk(), "s/1", kv_separation=True)
    k = codec.encode_edge_key(1, "a", codec.OUT, 1, 0, "b")
    p.put(k, b"props")
    p.put(b"\x02index", b"")
    assert p.scan_prefix(b"\x01", values=False) == [(k, None)]
    assert p.value_tier_reads == 0
    assert p.get(k) == b"props" and p.value_tier_reads == 1


def test_file_disk_persistence(tmp_path):
    disk = FileDisk(str(tmp_path))
    p = Partition(1, disk, "s/1")
    p.put(b"a", b"1")
    p.checkpoint()
    p.put(b"b", b"2")
    disk.close()
    q = Partition(1, FileDisk(str(tmp_path)), "s/1")
    assert q.items() == [(b"a", b"1"), (b"b", b"2")]


@given(ops, st.integers(0, 60), st.booleans())
def test_random_ops_match_dict_oracle_across_crash(batch, cut, sep):
    disk = MemoryDisk()
    p = Partition(1, disk, "s/1", kv_separation=sep)
    model: dict = {}
    for i, op in enumerate(batch):
        if i == cut:
            p.checkpoint()
        p.write_batch([op])
        apply_oracle(model, op)
    assert p.items() == sorted(model.items())
    disk.crash()
    q = Partition(1, disk, "s/1", kv_separation=sep)
    assert q.items() == sorted(model.items())
    assert len({k for k, _ in q.items()}) == len(q.items())


@given(ops, keys)
def test_prefix_scan_matches_sorted_filter(batch, prefix):
    p = Partition(1, MemoryDisk(), "s/1")
    model: dict = {}
    for op in batch:
        p.write_batch([op])
        apply_oracle(model, op)
    assert p.scan_prefix(prefix) == sorted((k, v) for k, v in model.items() if k.startswith(prefix))


@given(st.lists(st.tuples(st.sampled_from([b"\x01", b"\x02"]), keys, values.filter(bool)), max_size=30))
def test_kv_separation_is_read_transparent(puts):
    plain = Partition(1, MemoryDisk(), "s/1")
    sep = Partition(1, MemoryDisk(), "s/1", kv_separation=True)
    for kind, k, v in puts:
        plain.put(kind + k, v)
        sep.put(kind + k, v)
    assert plain.items() == sep.items()
    assert plain.state_hash() == sep.state_hash()
