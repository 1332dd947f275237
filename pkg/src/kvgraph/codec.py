"""Byte-exact key and value encodings.

Every persisted record is ``kind(1) | part(u32 BE) | body``.  Data keys share
``0x01 | part | vid`` so that a vertex, its tags and all its incident edges
form one contiguous prefix range.  See ``docs/key-format.md`` for worked
examples.
"""

from __future__ import annotations

import datetime as dt
import math
import struct
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .errors import EncodingError, IndexEncodingError, ValueTypeError
from .schema import PropertyType, PropertyValue, Schema, coerce_value

KIND_DATA = 0x01
KIND_INDEX = 0x02
KIND_LOCK = 0x03
KIND_SYSTEM = 0x04

REC_VERTEX = 0x00
REC_TAG = 0x01
REC_OUT = 0x02
REC_IN = 0x03

OUT = "out"
IN = "in"

DEFAULT_VID_LEN = 16
MVCC_PLACEHOLDER = b"\x00"

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_U16 = struct.Struct(">H")
_SIGN = 1 << 63
_EPOCH = dt.datetime(1970, 1, 1)
_EPOCH_ORDINAL = dt.date(1970, 1, 1).toordinal()

VidLike = Union[str, bytes]


# ---------------------------------------------------------------------------
# vids and fixed-width integers
# ---------------------------------------------------------------------------

def pad_vid(vid: VidLike, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    raw = vid.encode("utf-8") if isinstance(vid, str) else bytes(vid)
    if len(raw) > vid_len:
        raise EncodingError(f"vid {vid!r} is {len(raw)} bytes, longer than vid_len={vid_len}")
    if b"\x00" in raw:
        raise EncodingError(f"vid {vid!r} contains a NUL byte")
    return raw + b"\x00" * (vid_len - len(raw))


def unpad_vid(padded: bytes) -> str:
    return padded.rstrip(b"\x00").decode("utf-8")


def encode_rank(rank: int) -> bytes:
    if not -_SIGN <= rank < _SIGN:
        raise EncodingError(f"rank {rank} outside int64")
    return _U64.pack((rank + _SIGN) & 0xFFFFFFFFFFFFFFFF)


def decode_rank(b: bytes) -> int:
    return _U64.unpack(b)[0] - _SIGN


def _u32(n: int) -> bytes:
    if not 0 <= n <= 0xFFFFFFFF:
        raise EncodingError(f"{n} does not fit in u32")
    return _U32.pack(n)


def prefix_end(prefix: bytes) -> Optional[bytes]:
    """Smallest byte string greater than every key starting with ``prefix``."""
    p = bytearray(prefix)
    while p and p[-1] == 0xFF:
        p.pop()
    if not p:
        return None
    p[-1] += 1
    return bytes(p)


# ---------------------------------------------------------------------------
# data keys
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VertexKey:
    part: int
    vid: str


@dataclass(frozen=True)
class TagKey:
    part: int
    vid: str
    tag_id: int


@dataclass(frozen=True)
class EdgeKey:
    """An out- or in-edge record.  ``vid`` owns the key; ``other`` is the far end."""

    part: int
    vid: str
    direction: str
    edge_type: int
    rank: int
    other: str

    @property
    def src(self) -> str:
        return self.vid if self.direction == OUT else self.other

    @property
    def dst(self) -> str:
        return self.other if self.direction == OUT else self.vid


@dataclass(frozen=True)
class IndexKey:
    part: int
    index_id: int
    values: tuple
    vid: Optional[str] = None
    src: Optional[str] = None
    rank: Optional[int] = None
    dst: Optional[str] = None


@dataclass(frozen=True)
class LockKey:
    part: int
    src: str
    edge_type: int
    rank: int


def data_prefix(part: int) -> bytes:
    return bytes([KIND_DATA]) + _u32(part)


def vertex_prefix(part: int, vid: VidLike, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return data_prefix(part) + pad_vid(vid, vid_len)


def encode_vertex_key(part: int, vid: VidLike, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return vertex_prefix(part, vid, vid_len) + bytes([REC_VERTEX])


def encode_tag_key(part: int, vid: VidLike, tag_id: int, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return vertex_prefix(part, vid, vid_len) + bytes([REC_TAG]) + _u32(tag_id)


def tag_prefix(part: int, vid: VidLike, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return vertex_prefix(part, vid, vid_len) + bytes([REC_TAG])


def encode_edge_key(
    part: int,
    vid: VidLike,
    direction: str,
    edge_type: int,
    rank: int,
    other: VidLike,
    vid_len: int = DEFAULT_VID_LEN,
) -> bytes:
    """Edge key owned by ``vid``: the source for ``OUT``, the destination for ``IN``."""
    if direction not in (OUT, IN):
        raise EncodingError(f"bad direction {direction!r}")
    rec = REC_OUT if direction == OUT else REC_IN
    return (
        vertex_prefix(part, vid, vid_len)
        + bytes([rec])
        + _u32(edge_type)
        + encode_rank(rank)
        + pad_vid(other, vid_len)
        + MVCC_PLACEHOLDER
    )


def edge_prefix(
    part: int,
    vid: VidLike,
    direction: str,
    edge_type: Optional[int] = None,
    vid_len: int = DEFAULT_VID_LEN,
) -> bytes:
    rec = REC_OUT if direction == OUT else REC_IN
    p = vertex_prefix(part, vid, vid_len) + bytes([rec])
    if edge_type is not None:
        p += _u32(edge_type)
    return p


def decode_data_key(key: bytes, vid_len: int = DEFAULT_VID_LEN) -> Union[VertexKey, TagKey, EdgeKey]:
    if not key or key[0] != KIND_DATA:
        raise EncodingError("not a data key")
    part = _U32.unpack_from(key, 1)[0]
    vid = unpad_vid(key[5 : 5 + vid_len])
    pos = 5 + vid_len
    rec = key[pos]
    if rec == REC_VERTEX:
        if len(key) != pos + 1:
            raise EncodingError("bad vertex key length")
        return VertexKey(part, vid)
    if rec == REC_TAG:
        if len(key) != pos + 5:
            raise EncodingError("bad tag key length")
        return TagKey(part, vid, _U32.unpack_from(key, pos + 1)[0])
    if rec in (REC_OUT, REC_IN):
        if len(key) != pos + 1 + 4 + 8 + vid_len + 1:
            raise EncodingError("bad edge key length")
        etype = _U32.unpack_from(key, pos + 1)[0]
        rank = decode_rank(key[pos + 5 : pos + 13])
        other = unpad_vid(key[pos + 13 : pos + 13 + vid_len])
        return EdgeKey(part, vid, OUT if rec == REC_OUT else IN, etype, rank, other)
    raise EncodingError(f"unknown record kind {rec:#x}")


def record_kind(key: bytes, vid_len: int = DEFAULT_VID_LEN) -> int:
    """Record discriminator of a data key without a full decode."""
    return key[5 + vid_len]


# ---------------------------------------------------------------------------
# order-preserving scalar encodings (index binary)
# ---------------------------------------------------------------------------

def _date_days(d: dt.date) -> int:
    return d.toordinal() - _EPOCH_ORDINAL


def _datetime_micros(t: dt.datetime) -> int:
    delta = t.replace(tzinfo=None) - _EPOCH
    return (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds


def _micros_datetime(us: int) -> dt.datetime:
    return _EPOCH + dt.timedelta(microseconds=us)


def encode_index_value(ptype: PropertyType, value: PropertyValue) -> bytes:
    if value is None:
        raise IndexEncodingError("Null cannot be indexed")
    value = coerce_value(ptype, value)
    if ptype is PropertyType.BOOL:
        return b"\x01" if value else b"\x00"
    if ptype is PropertyType.INT64:
        return encode_rank(value)
    if ptype is PropertyType.DOUBLE:
        if math.isnan(value):
            raise IndexEncodingError("NaN cannot be indexed")
        if value == 0.0:
            value = 0.0  # fold -0.0
        bits = struct.unpack(">Q", struct.pack(">d", value))[0]
        bits = bits ^ 0xFFFFFFFFFFFFFFFF if bits & _SIGN else bits | _SIGN
        return _U64.pack(bits)
    if ptype is PropertyType.STRING:
        raw = value.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise IndexEncodingError("indexed string longer than 65535 bytes")
        return raw
    if ptype is PropertyType.DATE:
        return encode_rank(_date_days(value))
    if ptype is PropertyType.DATETIME:
        return encode_rank(_datetime_micros(value))
    raise IndexEncodingError(f"type {ptype} not indexable")


def decode_index_value(ptype: PropertyType, b: bytes) -> PropertyValue:
    if ptype is PropertyType.BOOL:
        return b == b"\x01"
    if ptype is PropertyType.INT64:
        return decode_rank(b)
    if ptype is PropertyType.DOUBLE:
        bits = _U64.unpack(b)[0]
        bits = bits ^ _SIGN if bits & _SIGN else bits ^ 0xFFFFFFFFFFFFFFFF
        return struct.unpack(">d", struct.pack(">Q", bits))[0]
    if ptype is PropertyType.STRING:
        return b.decode("utf-8")
    if ptype is PropertyType.DATE:
        return dt.date.fromordinal(decode_rank(b) + _EPOCH_ORDINAL)
    if ptype is PropertyType.DATETIME:
        return _micros_datetime(decode_rank(b))
    raise IndexEncodingError(f"type {ptype} not indexable")


# ---------------------------------------------------------------------------
# index keys
# ---------------------------------------------------------------------------

def index_prefix(part: int, index_id: int) -> bytes:
    return bytes([KIND_INDEX]) + _u32(part) + _u32(index_id)


def index_binary(types: Sequence[PropertyType], values: Sequence[PropertyValue]) -> tuple[bytes, bytes]:
    """(concatenated order-preserving encodings, u16 BE length segment)."""
    if len(types) != len(values):
        raise IndexEncodingError("index value count does not match index definition")
    parts = [encode_index_value(t, v) for t, v in zip(types, values)]
    lengths = b"".join(_U16.pack(len(p)) for p in parts)
    return b"".join(parts), lengths


def encode_index_key(
    part: int,
    index_id: int,
    types: Sequence[PropertyType],
    values: Sequence[PropertyValue],
    vid: VidLike,
    vid_len: int = DEFAULT_VID_LEN,
) -> bytes:
    binary, lengths = index_binary(types, values)
    return index_prefix(part, index_id) + binary + lengths + pad_vid(vid, vid_len)


def encode_edge_index_key(
    part: int,
    index_id: int,
    types: Sequence[PropertyType],
    values: Sequence[PropertyValue],
    src: VidLike,
    rank: int,
    dst: VidLike,
    vid_len: int = DEFAULT_VID_LEN,
) -> bytes:
    binary, lengths = index_binary(types, values)
    suffix = pad_vid(src, vid_len) + encode_rank(rank) + pad_vid(dst, vid_len)
    return index_prefix(part, index_id) + binary + lengths + suffix


def decode_index_key(
    key: bytes,
    types: Sequence[PropertyType],
    vid_len: int = DEFAULT_VID_LEN,
    edge: bool = False,
) -> IndexKey:
    if not key or key[0] != KIND_INDEX:
        raise EncodingError("not an index key")
    part = _U32.unpack_from(key, 1)[0]
    index_id = _U32.unpack_from(key, 5)[0]
    tail = 2 * vid_len + 8 if edge else vid_len
    k = len(types)
    end_binary = len(key) - tail - 2 * k
    if end_binary < 9:
        raise EncodingError("index key too short")
    lengths = [_U16.unpack_from(key, end_binary + 2 * i)[0] for i in range(k)]
    if sum(lengths) != end_binary - 9:
        raise EncodingError("index length segment does not match binary")
    values = []
    pos = 9
    for t, n in zip(types, lengths):
        values.append(decode_index_value(t, key[pos : pos + n]))
        pos += n
    suffix = key[len(key) - tail :]
    if edge:
        return IndexKey(
            part,
            index_id,
            tuple(values),
            src=unpad_vid(suffix[:vid_len]),
            rank=decode_rank(suffix[vid_len : vid_len + 8]),
            dst=unpad_vid(suffix[vid_len + 8 :]),
        )
    return IndexKey(part, index_id, tuple(values), vid=unpad_vid(suffix))


# ---------------------------------------------------------------------------
# TOSS lock keys and pending edge payloads
# ---------------------------------------------------------------------------

def lock_prefix(part: int) -> bytes:
    return bytes([KIND_LOCK]) + _u32(part)


def encode_lock_key(part: int, src: VidLike, edge_type: int, rank: int, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return lock_prefix(part) + pad_vid(src, vid_len) + _u32(edge_type) + encode_rank(rank)


def decode_lock_key(key: bytes, vid_len: int = DEFAULT_VID_LEN) -> LockKey:
    if not key or key[0] != KIND_LOCK or len(key) != 5 + vid_len + 12:
        raise EncodingError("not a lock key")
    part = _U32.unpack_from(key, 1)[0]
    src = unpad_vid(key[5 : 5 + vid_len])
    etype = _U32.unpack_from(key, 5 + vid_len)[0]
    rank = decode_rank(key[9 + vid_len :])
    return LockKey(part, src, etype, rank)


PENDING_PUT = 1
PENDING_DELETE = 2


@dataclass(frozen=True)
class PendingEdge:
    """The edge write a TOSS lock is protecting."""

    op: int
    src: str
    dst: str
    edge_type: int
    rank: int
    value: bytes = b""


def encode_pending(p: PendingEdge, vid_len: int = DEFAULT_VID_LEN) -> bytes:
    return (
        bytes([p.op])
        + pad_vid(p.src, vid_len)
        + pad_vid(p.dst, vid_len)
        + _u32(p.edge_type)
        + encode_rank(p.rank)
        + _u32(len(p.value))
        + p.value
    )


def decode_pending(b: bytes, vid_len: int = DEFAULT_VID_LEN) -> PendingEdge:
    op = b[0]
    src = unpad_vid(b[1 : 1 + vid_len])
    dst = unpad_vid(b[1 + vid_len : 1 + 2 * vid_len])
    pos = 1 + 2 * vid_len
    etype = _U32.unpack_from(b, pos)[0]
    rank = decode_rank(b[pos + 4 : pos + 12])
    n = _U32.unpack_from(b, pos + 12)[0]
    value = b[pos + 16 : pos + 16 + n]
    if len(value) != n or op not in (PENDING_PUT, PENDING_DELETE):
        raise EncodingError("corrupt pending edge payload")
    return PendingEdge(op, src, dst, etype, rank, value)


# ---------------------------------------------------------------------------
# system keys
# ---------------------------------------------------------------------------

def encode_system_key(part: int, name: str) -> bytes:
    return bytes([KIND_SYSTEM]) + _u32(part) + name.encode("utf-8")


# ---------------------------------------------------------------------------
# row values
# ---------------------------------------------------------------------------

_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")
_I32 = struct.Struct("<i")
_LEN = struct.Struct("<I")


def serialize_row(schema: Schema, values: Sequence[PropertyValue]) -> bytes:
    """Encode ``values`` (schema order) as ``version | null bitmap | payload``."""
    props = schema.props
    if len(values) != len(props):
        raise ValueTypeError(f"row has {len(values)} values, schema has {len(props)} properties")
    bitmap = bytearray((len(props) + 7) // 8)
    payload = bytearray()
    for i, (p, v) in enumerate(zip(props, values)):
        if v is None:
            if not p.nullable:
                raise ValueTypeError(f"property {p.name!r} is NOT NULL")
            bitmap[i >> 3] |= 1 << (i & 7)
            continue
        v = coerce_value(p.type, v)
        t = p.type
        if t is PropertyType.BOOL:
            payload.append(1 if v else 0)
        elif t is PropertyType.INT64:
            payload += _I64.pack(v)
        elif t is PropertyType.DOUBLE:
            payload += _F64.pack(v)
        elif t is PropertyType.STRING:
            raw = v.encode("utf-8")
            payload += _LEN.pack(len(raw)) + raw
        elif t is PropertyType.DATE:
            payload += _I32.pack(_date_days(v))
        elif t is PropertyType.DATETIME:
            payload += _I64.pack(_datetime_micros(v))
    return _U32.pack(schema.version) + bytes(bitmap) + bytes(payload)


def row_version(data: bytes) -> int:
    return _U32.unpack_from(data, 0)[0]


def decode_row_values(schema: Schema, data: bytes) -> list[PropertyValue]:
    """Decode a row written under exactly ``schema``."""
    if row_version(data) != schema.version:
        raise ValueTypeError(f"row version {row_version(data)} != schema version {schema.version}")
    props = schema.props
    nb = (len(props) + 7) // 8
    bitmap = data[4 : 4 + nb]
    pos = 4 + nb
    out: list[PropertyValue] = []
    for i, p in enumerate(props):
        if bitmap[i >> 3] & (1 << (i & 7)):
            out.append(None)
            continue
        t = p.type
        if t is PropertyType.BOOL:
            out.append(data[pos] == 1)
            pos += 1
        elif t is PropertyType.INT64:
            out.append(_I64.unpack_from(data, pos)[0])
            pos += 8
        elif t is PropertyType.DOUBLE:
            out.append(_F64.unpack_from(data, pos)[0])
            pos += 8
        elif t is PropertyType.STRING:
            n = _LEN.unpack_from(data, pos)[0]
            out.append(data[pos + 4 : pos + 4 + n].decode("utf-8"))
            pos += 4 + n
        elif t is PropertyType.DATE:
            out.append(dt.date.fromordinal(_I32.unpack_from(data, pos)[0] + _EPOCH_ORDINAL))
            pos += 4
        elif t is PropertyType.DATETIME:
            out.append(_micros_datetime(_I64.unpack_from(data, pos)[0]))
            pos += 8
    if pos != len(data):
        raise ValueTypeError("trailing bytes in row value")
    return out


def deserialize_row(
    schema_at: Callable[[int], Schema],
    data: bytes,
    target: Optional[Schema] = None,
) -> dict[str, PropertyValue]:
    """Decode a row and project it onto ``target`` (default: its own version).

    Properties added after the row was written read as their default (or
    Null); properties dropped since are omitted.
    """
    written = schema_at(row_version(data))
    values = dict(zip(written.names, decode_row_values(written, data)))
    if target is None or target.version == written.version:
        return values
    return {p.name: values[p.name] if p.name in values else p.default for p in target.props}
