"""Wire frames: a 4-byte big-endian length followed by a UTF-8 JSON object.

Requests are ``{"id", "op", "body"}``; responses ``{"id", "code", "body"}``
on success (code 0) or ``{"id", "code", "error": {"message", ...}}``.
"""

from __future__ import annotations

import datetime as dt
import json
import struct

from ..errors import ProtocolError

MAX_FRAME = 64 << 20
_LEN = struct.Struct(">I")


def encode_value(v):
    if isinstance(v, dt.datetime):
        return {"datetime": v.isoformat()}
    if isinstance(v, dt.date):
        return {"date": v.isoformat()}
    if isinstance(v, (list, tuple)):
        return [encode_value(x) for x in v]
    if isinstance(v, dict):
        return {"map": {k: encode_value(x) for k, x in v.items()}}
    return v


def decode_value(v):
    if isinstance(v, dict):
        if "datetime" in v:
            return dt.datetime.fromisoformat(v["datetime"])
        if "date" in v:
            return dt.date.fromisoformat(v["date"])
        if "map" in v:
            return {k: decode_value(x) for k, x in v["map"].items()}
    if isinstance(v, list):
        return [decode_value(x) for x in v]
    return v


def pack(obj: dict) -> bytes:
    data = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(data) > MAX_FRAME:
        raise ProtocolError(f"frame of {len(data)} bytes exceeds {MAX_FRAME}")
    return _LEN.pack(len(data)) + data


def unpack_body(data: bytes) -> dict:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"frame is not JSON: {e}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    return obj


def _read_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed")
        buf += chunk
    return bytes(buf)


def read_frame(sock) -> dict:
    (n,) = _LEN.unpack(_read_exact(sock, 4))
    if n > MAX_FRAME:
        raise ProtocolError(f"frame of {n} bytes exceeds {MAX_FRAME}")
    return unpack_body(_read_exact(sock, n))


def write_frame(sock, obj: dict):
    sock.sendall(pack(obj))
