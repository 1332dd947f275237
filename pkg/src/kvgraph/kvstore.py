"""Per-partition ordered key-value store with a CRC'd write-ahead log.

The store is an in-memory sorted map made durable by a WAL plus periodic
snapshots.  Files live on a ``Disk`` (real directory or an in-memory stand-in
that survives simulated crashes) under ``<space>/<part>/{wal,snap}``.

WAL record::

    u32 length | u32 crc32(payload) | payload
    payload = u64 seq | u32 n_ops | op*
    op      = u8 kind(1=put, 2=delete) | u32 klen | key [| u32 vlen | value]

A truncated or corrupt tail record is treated as never written.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol

from sortedcontainers import SortedDict

from .codec import KIND_DATA, prefix_end
from .errors import ChecksumError, PartNotFound

OP_PUT = 1
OP_DELETE = 2

_HDR = struct.Struct("<II")
_SEQ = struct.Struct("<QI")
_LEN = struct.Struct("<I")
_SNAP_HDR = struct.Struct("<4sIIQQ")
_SNAP_MAGIC = b"KVGS"

Op = tuple  # (OP_PUT, key, value) | (OP_DELETE, key)


# ---------------------------------------------------------------------------
# disks
# ---------------------------------------------------------------------------

class Disk(Protocol):
    def append(self, name: str, data: bytes) -> None: ...
    def flush(self, name: str) -> None: ...
    def read(self, name: str) -> bytes: ...
    def write_atomic(self, name: str, data: bytes) -> None: ...
    def truncate(self, name: str) -> None: ...
    def exists(self, name: str) -> bool: ...
    def remove_tree(self, prefix: str) -> None: ...


class MemoryDisk:
    """Byte buffers keyed by path.  Survives the loss of every in-memory object
    that wrote to it, which is how tests simulate a process crash.

    ``append`` data sits in a volatile buffer until ``flush``; ``crash()``
    drops unflushed bytes.
    """

    def __init__(self):
        self.files: dict[str, bytearray] = {}
        self._pending: dict[str, bytearray] = {}
        self._lock = threading.Lock()

    def append(self, name, data):
        with self._lock:
            self._pending.setdefault(name, bytearray()).extend(data)

    def flush(self, name):
        with self._lock:
            buf = self._pending.pop(name, None)
            if buf:
                self.files.setdefault(name, bytearray()).extend(buf)
            else:
                self.files.setdefault(name, bytearray())

    def read(self, name):
        with self._lock:
            return bytes(self.files.get(name, b""))

    def write_atomic(self, name, data):
        with self._lock:
            self.files[name] = bytearray(data)

    def truncate(self, name):
        with self._lock:
            self.files[name] = bytearray()
            self._pending.pop(name, None)

    def exists(self, name):
        return name in self.files

    def remove_tree(self, prefix):
        with self._lock:
            for k in [k for k in self.files if k.startswith(prefix)]:
                del self.files[k]
            for k in [k for k in self._pending if k.startswith(prefix)]:
                del self._pending[k]

    def crash(self):
        """Lose every unflushed append."""
        with self._lock:
            self._pending.clear()

    def copy(self) -> "MemoryDisk":
        d = MemoryDisk()
        d.files = {k: bytearray(v) for k, v in self.files.items()}
        return d


class FileDisk:
    def __init__(self, root: str, fsync: bool = False):
        self.root = root
        self.fsync = fsync
        self._handles: dict[str, object] = {}
        self._lock = threading.Lock()

    def _path(self, name):
        return os.path.join(self.root, name)

    def _handle(self, name):
        h = self._handles.get(name)
        if h is None:
            path = self._path(name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            h = open(path, "ab")
            self._handles[name] = h
        return h

    def append(self, name, data):
        with self._lock:
            self._handle(name).write(data)

    def flush(self, name):
        with self._lock:
            h = self._handle(name)
            h.flush()
            if self.fsync:
                os.fsync(h.fileno())

    def read(self, name):
        path = self._path(name)
        with self._lock:
            h = self._handles.get(name)
            if h is not None:
                h.flush()
        if not os.path.exists(path):
            return b""
        with open(path, "rb") as f:
            return f.read()

    def write_atomic(self, name, data):
        path = self._path(name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            if self.fsync:
                os.fsync(f.fileno())
        os.replace(tmp, path)

    def truncate(self, name):
        with self._lock:
            h = self._handles.pop(name, None)
            if h is not None:
                h.close()
            path = self._path(name)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            open(path, "wb").close()

    def exists(self, name):
        return os.path.exists(self._path(name))

    def remove_tree(self, prefix):
        import shutil

        with self._lock:
            for k in [k for k in self._handles if k.startswith(prefix)]:
                self._handles.pop(k).close()
        shutil.rmtree(self._path(prefix), ignore_errors=True)

    def close(self):
        with self._lock:
            for h in self._handles.values():
                h.close()
            self._handles.clear()


# ---------------------------------------------------------------------------
# WAL encoding
# ---------------------------------------------------------------------------

def encode_ops(ops: Iterable[Op]) -> tuple[int, bytes]:
    out = bytearray()
    n = 0
    for op in ops:
        n += 1
        kind, key = op[0], op[1]
        out.append(kind)
        out += _LEN.pack(len(key)) + key
        if kind == OP_PUT:
            out += _LEN.pack(len(op[2])) + op[2]
        elif kind != OP_DELETE:
            raise ValueError(f"unknown op kind {kind}")
    return n, bytes(out)


def decode_ops(buf: bytes, pos: int, n: int) -> tuple[list[Op], int]:
    ops = []
    for _ in range(n):
        kind = buf[pos]
        klen = _LEN.unpack_from(buf, pos + 1)[0]
        key = bytes(buf[pos + 5 : pos + 5 + klen])
        pos += 5 + klen
        if kind == OP_PUT:
            vlen = _LEN.unpack_from(buf, pos)[0]
            ops.append((OP_PUT, key, bytes(buf[pos + 4 : pos + 4 + vlen])))
            pos += 4 + vlen
        else:
            ops.append((OP_DELETE, key))
    return ops, pos


def encode_wal_record(seq: int, ops: Iterable[Op]) -> bytes:
    n, body = encode_ops(ops)
    payload = _SEQ.pack(seq, n) + body
    return _HDR.pack(len(payload), zlib.crc32(payload)) + payload


def read_wal(data: bytes) -> list[tuple[int, list[Op]]]:
    """Decode WAL records, stopping at the first torn or corrupt one."""
    records = []
    pos = 0
    while pos + _HDR.size <= len(data):
        length, crc = _HDR.unpack_from(data, pos)
        payload = data[pos + _HDR.size : pos + _HDR.size + length]
        if len(payload) != length or zlib.crc32(payload) != crc:
            break
        seq, n = _SEQ.unpack_from(payload, 0)
        ops, _ = decode_ops(payload, _SEQ.size, n)
        records.append((seq, ops))
        pos += _HDR.size + length
    return records


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

@dataclass
class Snapshot:
    part_id: int
    last_seq: int
    items: list[tuple[bytes, bytes]] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        out = bytearray(_SNAP_HDR.pack(_SNAP_MAGIC, 1, self.part_id, self.last_seq, len(self.items)))
        for k, v in self.items:
            out += _LEN.pack(len(k)) + k + _LEN.pack(len(v)) + v
        out += _LEN.pack(zlib.crc32(out))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Snapshot":
        if len(data) < _SNAP_HDR.size + 4:
            raise ChecksumError("snapshot truncated")
        (crc,) = _LEN.unpack_from(data, len(data) - 4)
        if zlib.crc32(data[:-4]) != crc:
            raise ChecksumError("snapshot checksum mismatch")
        magic, version, part, last_seq, count = _SNAP_HDR.unpack_from(data, 0)
        if magic != _SNAP_MAGIC or version != 1:
            raise ChecksumError("bad snapshot header")
        pos = _SNAP_HDR.size
        items = []
        for _ in range(count):
            klen = _LEN.unpack_from(data, pos)[0]
            k = data[pos + 4 : pos + 4 + klen]
            pos += 4 + klen
            vlen = _LEN.unpack_from(data, pos)[0]
            v = data[pos + 4 : pos + 4 + vlen]
            pos += 4 + vlen
            items.append((k, v))
        return cls(part, last_seq, items)


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------

class KVEngine(Protocol):
    """Storage-engine boundary; an LSM engine could implement the same surface."""

    def write_batch(self, ops: list[Op]) -> int: ...
    def get(self, key: bytes) -> Optional[bytes]: ...
    def scan_prefix(self, prefix: bytes, limit: Optional[int] = None, values: bool = True) -> list: ...


_SEPARATED = object()


class Partition:
    """One partition's ordered map, WAL and snapshot."""

    def __init__(self, part_id: int, disk: Disk, path: str, kv_separation: bool = False):
        self.part_id = part_id
        self.disk = disk
        self.path = path.rstrip("/")
        self.kv_separation = kv_separation
        self.memtable: SortedDict = SortedDict()
        self.value_tier: dict[bytes, bytes] = {}
        self.last_seq = 0
        self.value_tier_reads = 0
        self.key_reads = 0
        self._lock = threading.RLock()
        self._replay()

    @property
    def wal_name(self) -> str:
        return f"{self.path}/wal"

    @property
    def snap_name(self) -> str:
        return f"{self.path}/snap"

    # -- recovery --------------------------------------------------------
    def _replay(self):
        if self.disk.exists(self.snap_name):
            snap = Snapshot.from_bytes(self.disk.read(self.snap_name))
            self._load_items(snap.items)
            self.last_seq = snap.last_seq
        for seq, ops in read_wal(self.disk.read(self.wal_name)):
            if seq <= self.last_seq:
                continue
            self._apply(ops)
            self.last_seq = seq

    def _load_items(self, items):
        self.memtable.clear()
        self.value_tier.clear()
        for k, v in items:
            self._apply_put(k, v)

    # -- mutation --------------------------------------------------------
    def _separated(self, key: bytes, value: bytes) -> bool:
        return self.kv_separation and value and key[:1] == bytes([KIND_DATA])

    def _apply_put(self, key, value):
        if self._separated(key, value):
            self.memtable[key] = _SEPARATED
            self.value_tier[key] = value
        else:
            self.memtable[key] = value
            self.value_tier.pop(key, None)

    def _apply(self, ops):
        for op in ops:
            if op[0] == OP_PUT:
                self._apply_put(op[1], op[2])
            else:
                self.memtable.pop(op[1], None)
                self.value_tier.pop(op[1], None)

    def write_batch(self, ops: list[Op], sync: bool = True) -> int:
        """Apply ``ops`` atomically; durable in the WAL before returning."""
        with self._lock:
            seq = self.last_seq + 1
            self.disk.append(self.wal_name, encode_wal_record(seq, ops))
            if sync:
                self.disk.flush(self.wal_name)
            self._apply(ops)
            self.last_seq = seq
            return seq

    def put(self, key: bytes, value: bytes) -> int:
        return self.write_batch([(OP_PUT, key, value)])

    def delete(self, key: bytes) -> int:
        return self.write_batch([(OP_DELETE, key)])

    def sync(self):
        self.disk.flush(self.wal_name)

    # -- reads -----------------------------------------------------------
    def _value(self, key, stored):
        if stored is _SEPARATED:
            self.value_tier_reads += 1
            return self.value_tier[key]
        return stored

    def get(self, key: bytes) -> Optional[bytes]:
        with self._lock:
            self.key_reads += 1
            stored = self.memtable.get(key)
            if stored is None:
                return None
            return self._value(key, stored)

    def contains(self, key: bytes) -> bool:
        with self._lock:
            self.key_reads += 1
            return key in self.memtable

    def scan_range(self, start: bytes, end: Optional[bytes], limit: Optional[int] = None, values: bool = True):
        """Keys in ``[start, end)`` in byte order; ``values=False`` never touches the value tier."""
        with self._lock:
            out = []
            for k in self.memtable.irange(start, end, inclusive=(True, False)):
                if limit is not None and len(out) >= limit:
                    break
                out.append((k, self._value(k, self.memtable[k]) if values else None))
            self.key_reads += len(out)
            return out

    def scan_prefix(self, prefix: bytes, limit: Optional[int] = None, values: bool = True):
        if not prefix:
            return self.scan_range(b"", None, limit, values)
        return self.scan_range(prefix, prefix_end(prefix), limit, values)

    def items(self) -> list[tuple[bytes, bytes]]:
        return self.scan_prefix(b"")

    def __len__(self):
        return len(self.memtable)

    # -- snapshots -------------------------------------------------------
    def checkpoint(self) -> Snapshot:
        """Persist a snapshot and truncate the WAL it covers."""
        with self._lock:
            items = [(k, self._value(k, v)) for k, v in self.memtable.items()]
            snap = Snapshot(self.part_id, self.last_seq, items)
            self.disk.write_atomic(self.snap_name, snap.to_bytes())
            self.disk.truncate(self.wal_name)
            return snap

    def restore(self, snap: Snapshot):
        """Replace the partition's entire state with ``snap``."""
        with self._lock:
            self.disk.write_atomic(self.snap_name, snap.to_bytes())
            self.disk.truncate(self.wal_name)
            self._load_items(snap.items)
            self.last_seq = snap.last_seq

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for k, v in self.items():
            h.update(_LEN.pack(len(k)) + k + _LEN.pack(len(v)) + v)
        return h.hexdigest()


class KVStore:
    """A set of partitions for one graph space under ``<space>/<part>/``."""

    def __init__(self, disk: Disk, space: str, kv_separation: bool = False):
        self.disk = disk
        self.space = space
        self.kv_separation = kv_separation
        self.parts: dict[int, Partition] = {}

    def add_part(self, part_id: int) -> Partition:
        p = self.parts.get(part_id)
        if p is None:
            p = Partition(part_id, self.disk, f"{self.space}/{part_id}", self.kv_separation)
            self.parts[part_id] = p
        return p

    def part(self, part_id: int) -> Partition:
        try:
            return self.parts[part_id]
        except KeyError:
            raise PartNotFound(f"partition {part_id} not hosted") from None

    def put(self, part: int, key: bytes, value: bytes) -> int:
        return self.part(part).put(key, value)

    def delete(self, part: int, key: bytes) -> int:
        return self.part(part).delete(key)

    def get(self, part: int, key: bytes) -> Optional[bytes]:
        return self.part(part).get(key)

    def scan_prefix(self, part: int, prefix: bytes, limit: Optional[int] = None, values: bool = True):
        return self.part(part).scan_prefix(prefix, limit, values)

    def checkpoint(self, part: int) -> Snapshot:
        return self.part(part).checkpoint()

    def restore(self, part: int, snap: Snapshot):
        self.add_part(part).restore(snap)
