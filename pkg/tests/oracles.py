"""Independent reference implementations used as test oracles.

These are written directly from the byte layouts with ``int.to_bytes`` and
plain Python containers; they share no code with the package.
"""

from __future__ import annotations

from collections import Counter, defaultdict


def be32(n: int) -> bytes:
    return n.to_bytes(4, "big")


def biased(rank: int) -> bytes:
    return (rank + (1 << 63)).to_bytes(8, "big")


def padded(vid: str, n: int = 16) -> bytes:
    raw = vid.encode()
    return raw + bytes(n - len(raw))


def vertex_key(part: int, vid: str, n: int = 16) -> bytes:
    return b"\x01" + be32(part) + padded(vid, n) + b"\x00"


def tag_key(part: int, vid: str, tag: int, n: int = 16) -> bytes:
    return b"\x01" + be32(part) + padded(vid, n) + b"\x01" + be32(tag)


def edge_key(part: int, vid: str, out: bool, etype: int, rank: int, other: str, n: int = 16) -> bytes:
    return (b"\x01" + be32(part) + padded(vid, n) + (b"\x02" if out else b"\x03")
            + be32(etype) + biased(rank) + padded(other, n) + b"\x00")


def lock_key(part: int, src: str, etype: int, rank: int, n: int = 16) -> bytes:
    return b"\x03" + be32(part) + padded(src, n) + be32(etype) + biased(rank)


def string_index_key(part: int, iid: int, values: list[str], vid: str, n: int = 16) -> bytes:
    raw = [v.encode() for v in values]
    return (b"\x02" + be32(part) + be32(iid) + b"".join(raw)
            + b"".join(len(r).to_bytes(2, "big") for r in raw) + padded(vid, n))


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def part_of(vid: str, nparts: int, n: int = 16) -> int:
    return fnv1a64(padded(vid, n)) % nparts + 1


class Graph:
    """Plain adjacency lists with multiplicity-preserving traversal."""

    def __init__(self, edges):
        # edges: iterable of (src, etype, rank, dst, props)
        self.edges = list(edges)
        self.out = defaultdict(list)
        self.inn = defaultdict(list)
        for e in self.edges:
            src, etype, rank, dst, props = e
            self.out[src].append(e)
            self.inn[dst].append(e)

    def step(self, frontier, types, direction):
        """One expansion: list of (edge, next vid) per frontier occurrence."""
        out = []
        for v in frontier:
            if direction in ("out", "both"):
                out += [(e, e[3]) for e in self.out.get(v, []) if e[1] in types]
            if direction in ("in", "both"):
                out += [(e, e[0]) for e in self.inn.get(v, []) if e[1] in types]
        return out

    def go(self, seeds, steps, types, direction):
        """Multiset of (src, dst, etype, rank) rows of the last step (walk semantics:
        every frontier occurrence expands, duplicates included)."""
        frontier = list(seeds)
        rows = []
        for _ in range(steps):
            rows = self.step(frontier, types, direction)
            frontier = [nxt for _, nxt in rows]
        return Counter((e[0], e[3], e[1], e[2]) for e, _ in rows)
