"""A storage partition replica: the Raft state machine over one kv partition."""

from __future__ import annotations

import struct
from typing import Optional

from ..codec import encode_system_key
from ..kvstore import OP_PUT, Partition

_U64 = struct.Struct(">Q")


class PartReplica:
    """Applies committed op batches to a ``Partition``.

    Every batch is written together with the Raft index it came from (a
    system key), so a replica reopened from its WAL knows exactly which log
    entries it has already absorbed.
    """

    def __init__(self, kv: Partition):
        self.kv = kv
        self._applied_key = encode_system_key(kv.part_id, "raft_applied")
        raw = kv.get(self._applied_key)
        self._applied = _U64.unpack(raw)[0] if raw else 0

    def applied_index(self) -> int:
        return self._applied

    def apply(self, index: int, payload: Optional[list]) -> None:
        ops = list(payload) if payload else []
        ops.append((OP_PUT, self._applied_key, _U64.pack(index)))
        self.kv.write_batch(ops)
        self._applied = index
