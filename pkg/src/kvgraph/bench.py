"""Desk-scale social-network benchmark: generator, CSV importer, workloads, reports.

The dataset mimics the shape of a social-network benchmark graph (8 tag kinds,
19 edge kinds, power-law degrees) at toy scale.  Workloads are groups of
parameterized statements run per seed; client threads pull seeds from one
shared queue so every seed is consumed exactly once per run.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import os
import queue
import random
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from .errors import GraphError
from .server.metrics import quantile

log = logging.getLogger(__name__)

SPACE = "snb"
VID_LEN = 16
REPEATS = 3

# tag -> [(prop, type)]
TAGS: dict[str, list[tuple[str, str]]] = {
    "person": [("first_name", "string"), ("last_name", "string"), ("gender", "string"), ("birthday", "date")],
    "place": [("name", "string"), ("kind", "string")],
    "organisation": [("name", "string"), ("kind", "string")],
    "tagclass": [("name", "string")],
    "tag": [("name", "string")],
    "forum": [("title", "string"), ("creation_date", "int")],
    "post": [("content", "string"), ("length", "int"), ("creation_date", "int")],
    "comment": [("content", "string"), ("length", "int"), ("creation_date", "int")],
}

# edge -> (src tag, dst tag, [(prop, type)])
EDGES: dict[str, tuple[str, str, list[tuple[str, str]]]] = {
    "knows": ("person", "person", [("creation_date", "int")]),
    "has_interest": ("person", "tag", []),
    "person_is_located_in": ("person", "place", []),
    "study_at": ("person", "organisation", [("class_year", "int")]),
    "work_at": ("person", "organisation", [("work_from", "int")]),
    "has_member": ("forum", "person", [("join_date", "int")]),
    "has_moderator": ("forum", "person", []),
    "container_of": ("forum", "post", []),
    "forum_has_tag": ("forum", "tag", []),
    "post_has_creator": ("post", "person", []),
    "post_has_tag": ("post", "tag", []),
    "post_is_located_in": ("post", "place", []),
    "comment_has_creator": ("comment", "person", []),
    "comment_has_tag": ("comment", "tag", []),
    "reply_of_post": ("comment", "post", []),
    "reply_of_comment": ("comment", "comment", []),
    "likes_post": ("person", "post", [("creation_date", "int")]),
    "likes_comment": ("person", "comment", [("creation_date", "int")]),
    "tag_has_type": ("tag", "tagclass", []),
}

INDEXES = [
    ("TAG", "person_name", "person", ("first_name", "last_name")),
    ("TAG", "post_date", "post", ("creation_date",)),
    ("EDGE", "knows_since", "knows", ("creation_date",)),
]

_PREFIX = {"person": "p", "place": "pl", "organisation": "o", "tagclass": "tc",
           "tag": "t", "forum": "f", "post": "m", "comment": "c"}

_FIRST = ["Ada", "Bo", "Cai", "Dana", "Eli", "Fay", "Gus", "Hana", "Ivo", "Jun", "Kai", "Lea"]
_LAST = ["Ng", "Ortiz", "Park", "Quinn", "Rossi", "Sato", "Tran", "Umar", "Voss", "Wu"]
_WORDS = ["graph", "edge", "vertex", "raft", "index", "query", "shard", "log", "key", "value"]
_EPOCH = 1262304000  # 2010-01-01


def vertex_file(tag: str) -> str:
    return f"vertex_{tag}.csv"


def edge_file(edge: str) -> str:
    return f"edge_{edge}.csv"


def counts_for(scale: int) -> dict[str, int]:
    """Vertex counts per tag; ``scale`` is the number of persons."""
    if scale <= 0:
        return {t: 0 for t in TAGS}
    up = lambda d: -(-scale // d)  # noqa: E731
    return {"person": scale, "place": up(10), "organisation": up(10), "tagclass": up(50),
            "tag": up(5), "forum": up(4), "post": 3 * scale, "comment": 5 * scale}


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------
class _Picker:
    """Power-law choice over a population: weight of rank i is 1/(i+1)^alpha."""

    def __init__(self, rng: random.Random, items: list[str], alpha: float = 1.0):
        self.rng = rng
        self.items = items
        ranked = items[:]
        rng.shuffle(ranked)
        self.ranked = ranked
        acc, cum = 0.0, []
        for i in range(len(ranked)):
            acc += 1.0 / (i + 1) ** alpha
            cum.append(acc)
        self.cum = cum

    def pick(self) -> str:
        return self.rng.choices(self.ranked, cum_weights=self.cum)[0]

    def uniform(self) -> str:
        return self.items[self.rng.randrange(len(self.items))]


def generate(scale: int, seed: int, out_dir: str) -> dict[str, int]:
    """Write one CSV per tag and per edge type; returns row counts per file.

    Byte-identical output for the same ``(scale, seed)``.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(seed)
    n = counts_for(scale)
    vids = {t: [f"{_PREFIX[t]}{i}" for i in range(n[t])] for t in TAGS}
    ts = lambda: _EPOCH + rng.randrange(10 * 365 * 86400)  # noqa: E731

    def text() -> str:
        return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 6)))

    vrows: dict[str, list[list]] = {t: [] for t in TAGS}
    for v in vids["person"]:
        bday = dt.date(1950, 1, 1) + dt.timedelta(days=rng.randrange(50 * 365))
        vrows["person"].append([v, rng.choice(_FIRST), rng.choice(_LAST), rng.choice(["male", "female"]), bday.isoformat()])
    for i, v in enumerate(vids["place"]):
        vrows["place"].append([v, f"place{i}", rng.choice(["city", "country", "continent"])])
    for i, v in enumerate(vids["organisation"]):
        vrows["organisation"].append([v, f"org{i}", rng.choice(["company", "university"])])
    for i, v in enumerate(vids["tagclass"]):
        vrows["tagclass"].append([v, f"class{i}"])
    for i, v in enumerate(vids["tag"]):
        vrows["tag"].append([v, f"tag{i}"])
    for i, v in enumerate(vids["forum"]):
        vrows["forum"].append([v, f"forum {i}", ts()])
    for kind in ("post", "comment"):
        for v in vids[kind]:
            body = text()
            vrows[kind].append([v, body, len(body), ts()])

    erows: dict[str, list[list]] = {e: [] for e in EDGES}
    if scale > 0:
        pick = {t: _Picker(rng, vids[t]) for t in TAGS}

        def add(edge: str, src: str, dst: str, *props):
            erows[edge].append([src, dst, 0, *props])

        seen: set[tuple[str, str]] = set()
        for p in vids["person"]:
            k = min(len(vids["person"]) - 1, int(rng.paretovariate(1.2)) + 1)
            for _ in range(k):
                q = pick["person"].pick()
                if q != p and (p, q) not in seen:
                    seen.add((p, q))
                    add("knows", p, q, ts())
            for t in dict.fromkeys(pick["tag"].pick() for _ in range(rng.randint(1, 3))):
                add("has_interest", p, t)
            add("person_is_located_in", p, pick["place"].uniform())
            if rng.random() < 0.6:
                add("study_at", p, pick["organisation"].uniform(), rng.randint(1990, 2020))
            if rng.random() < 0.7:
                add("work_at", p, pick["organisation"].pick(), rng.randint(1995, 2022))
        for f in vids["forum"]:
            add("has_moderator", f, pick["person"].pick())
            for p in dict.fromkeys(pick["person"].pick() for _ in range(rng.randint(1, 8))):
                add("has_member", f, p, ts())
            add("forum_has_tag", f, pick["tag"].pick())
        for m in vids["post"]:
            add("container_of", pick["forum"].pick(), m)
            add("post_has_creator", m, pick["person"].pick())
            add("post_has_tag", m, pick["tag"].pick())
            add("post_is_located_in", m, pick["place"].uniform())
        for i, c in enumerate(vids["comment"]):
            add("comment_has_creator", c, pick["person"].pick())
            add("comment_has_tag", c, pick["tag"].pick())
            if i > 0 and rng.random() < 0.3:
                add("reply_of_comment", c, vids["comment"][rng.randrange(i)])
            else:
                add("reply_of_post", c, pick["post"].pick())
        for p in vids["person"]:
            for m in dict.fromkeys(pick["post"].pick() for _ in range(rng.randint(0, 4))):
                add("likes_post", p, m, ts())
            for c in dict.fromkeys(pick["comment"].pick() for _ in range(rng.randint(0, 3))):
                add("likes_comment", p, c, ts())
        for t in vids["tag"]:
            add("tag_has_type", t, pick["tagclass"].uniform())

    written = {}
    for tag, props in TAGS.items():
        header = ["vid", "tag"] + [p for p, _ in props]
        rows = [[r[0], tag, *r[1:]] for r in vrows[tag]]
        written[vertex_file(tag)] = _write_csv(os.path.join(out_dir, vertex_file(tag)), header, rows)
    for edge, (_, _, props) in EDGES.items():
        header = ["src", "dst", "type", "rank"] + [p for p, _ in props]
        rows = [[r[0], r[1], edge, *r[2:]] for r in erows[edge]]
        written[edge_file(edge)] = _write_csv(os.path.join(out_dir, edge_file(edge)), header, rows)
    return written


def _write_csv(path: str, header: list[str], rows: list[list]) -> int:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return len(rows)


# ---------------------------------------------------------------------------
# reading CSVs
# ---------------------------------------------------------------------------
_PARSE: dict[str, Callable[[str], object]] = {"string": str, "int": int, "date": dt.date.fromisoformat}


@dataclass
class Malformed:
    file: str
    line: int
    reason: str


def read_vertices(path: str, tag: str, bad: list[Malformed]) -> list[tuple[str, dict]]:
    """Parse a vertex CSV into ``(vid, props)``; malformed rows go to ``bad``."""
    props = TAGS[tag]
    out = []
    for line, row in _rows(path, bad):
        try:
            if len(row) != 2 + len(props):
                raise ValueError(f"expected {2 + len(props)} fields, got {len(row)}")
            vid, t = row[0], row[1]
            if not vid or len(vid.encode()) > VID_LEN:
                raise ValueError(f"bad vid {vid!r}")
            if t != tag:
                raise ValueError(f"tag {t!r} in {tag} file")
            out.append((vid, {p: _PARSE[ty](v) for (p, ty), v in zip(props, row[2:])}))
        except ValueError as e:
            _reject(bad, path, line, str(e))
    return out


def read_edges(path: str, edge: str, bad: list[Malformed]) -> list[tuple[str, str, int, str, dict]]:
    """Parse an edge CSV into ``(src, edge, rank, dst, props)``."""
    props = EDGES[edge][2]
    out = []
    for line, row in _rows(path, bad):
        try:
            if len(row) != 4 + len(props):
                raise ValueError(f"expected {4 + len(props)} fields, got {len(row)}")
            src, dst, t, rank = row[:4]
            if not src or not dst or len(src.encode()) > VID_LEN or len(dst.encode()) > VID_LEN:
                raise ValueError("bad endpoint vid")
            if t != edge:
                raise ValueError(f"type {t!r} in {edge} file")
            out.append((src, edge, int(rank), dst, {p: _PARSE[ty](v) for (p, ty), v in zip(props, row[4:])}))
        except ValueError as e:
            _reject(bad, path, line, str(e))
    return out


def _rows(path: str, bad: list[Malformed]):
    if not os.path.exists(path):
        return
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader, None)
        for row in reader:
            yield reader.line_num, row


def _reject(bad: list[Malformed], path: str, line: int, reason: str):
    bad.append(Malformed(os.path.basename(path), line, reason))
    log.warning("skipping malformed row %s:%d: %s", path, line, reason)


# ---------------------------------------------------------------------------
# targets: an in-process cluster or a remote server
# ---------------------------------------------------------------------------
class LocalTarget:
    def __init__(self, cluster):
        self.cluster = cluster

    def connect(self):
        from .server.repl import LocalClient

        return LocalClient(self.cluster)

    def state_hash(self, space: str) -> Optional[str]:
        return self.cluster.state_hash(space)


class RemoteTarget:
    def __init__(self, host: str, port: int, user: str = "root", password: str = "root"):
        self.host, self.port, self.user, self.password = host, port, user, password

    def connect(self):
        from .server.client import Client

        c = Client(self.host, self.port).connect()
        c.authenticate(self.user, self.password)
        return c

    def state_hash(self, space: str) -> Optional[str]:
        return None


def _close(conn):
    close = getattr(conn, "close", None)
    if close:
        close()


def schema_statements(partition_num: int = 10, replica_factor: int = 1) -> list[str]:
    out = [f"CREATE SPACE IF NOT EXISTS {SPACE}(partition_num = {partition_num}, "
           f"replica_factor = {replica_factor}, vid_type = FIXED_STRING({VID_LEN}))", f"USE {SPACE}"]
    for tag, props in TAGS.items():
        out.append(f"CREATE TAG IF NOT EXISTS {tag}(" + ", ".join(f"{p} {t} NOT NULL" for p, t in props) + ")")
    for edge, (_, _, props) in EDGES.items():
        out.append(f"CREATE EDGE IF NOT EXISTS {edge}(" + ", ".join(f"{p} {t} NOT NULL" for p, t in props) + ")")
    for kind, name, schema, fields in INDEXES:
        out.append(f"CREATE {kind} INDEX IF NOT EXISTS {name} ON {schema}({', '.join(fields)})")
    return out


# ---------------------------------------------------------------------------
# import
# ---------------------------------------------------------------------------
@dataclass
class LoadStats:
    vertices: int = 0
    edges: int = 0
    malformed: int = 0
    seconds: float = 0.0
    rows_per_sec: float = 0.0
    bulk: bool = True
    per_file: dict[str, int] = field(default_factory=dict)
    rejected: list[Malformed] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejected"] = [asdict(m) for m in self.rejected[:100]]
        return d


def _lit(v) -> str:
    from .query.printer import literal

    return literal(v)


def import_dataset(target, data_dir: str, bulk: bool = True, batch: int = 500,
                   partition_num: int = 10, replica_factor: int = 1) -> LoadStats:
    """Create the schema and load every CSV under ``data_dir``.

    Bulk mode writes data without index maintenance and then rebuilds every
    index; row mode inserts one row at a time with indexes kept current.
    """
    stats = LoadStats(bulk=bulk)
    conn = target.connect()
    try:
        for s in schema_statements(partition_num, replica_factor):
            conn.execute(s)
        t0 = time.perf_counter()
        for tag in TAGS:
            rows = read_vertices(os.path.join(data_dir, vertex_file(tag)), tag, stats.rejected)
            stats.per_file[vertex_file(tag)] = len(rows)
            stats.vertices += len(rows)
            _load_vertices(target, conn, tag, rows, bulk, batch)
        for edge in EDGES:
            rows = read_edges(os.path.join(data_dir, edge_file(edge)), edge, stats.rejected)
            stats.per_file[edge_file(edge)] = len(rows)
            stats.edges += len(rows)
            _load_edges(target, conn, edge, rows, bulk, batch)
        if bulk:
            for kind, name, _, _ in INDEXES:
                conn.execute(f"REBUILD {kind} INDEX {name}")
        stats.seconds = time.perf_counter() - t0
    finally:
        _close(conn)
    stats.malformed = len(stats.rejected)
    total = stats.vertices + stats.edges
    stats.rows_per_sec = total / stats.seconds if stats.seconds > 0 else 0.0
    return stats


def _load_vertices(target, conn, tag: str, rows: list, bulk: bool, batch: int):
    if isinstance(target, LocalTarget):
        st = target.cluster.storage
        if bulk:
            for i in range(0, len(rows), batch):
                st.insert_vertices(SPACE, [(v, {tag: p}) for v, p in rows[i:i + batch]], ignore_existed_index=True)
        else:
            for v, p in rows:
                st.insert_vertex(SPACE, v, {tag: p})
        return
    names = [p for p, _ in TAGS[tag]]
    flag = "IGNORE_EXISTED_INDEX " if bulk else ""
    step = batch if bulk else 1
    for i in range(0, len(rows), step):
        vals = ", ".join(f"{_lit(v)}:({', '.join(_lit(p[n]) for n in names)})" for v, p in rows[i:i + step])
        conn.execute(f"INSERT VERTEX {flag}{tag}({', '.join(names)}) VALUES {vals}")


def _load_edges(target, conn, edge: str, rows: list, bulk: bool, batch: int):
    if isinstance(target, LocalTarget):
        st = target.cluster.storage
        if bulk:
            for i in range(0, len(rows), batch):
                st.bulk_insert_edges(SPACE, rows[i:i + batch], ignore_existed_index=True)
        else:
            for src, e, rank, dst, p in rows:
                st.insert_edge(SPACE, src, e, rank, dst, p)
        return
    names = [p for p, _ in EDGES[edge][2]]
    step = batch if bulk else 1
    for i in range(0, len(rows), step):
        vals = ", ".join(f"{_lit(s)}->{_lit(d)}@{r}:({', '.join(_lit(p[n]) for n in names)})"
                         for s, _, r, d, p in rows[i:i + step])
        conn.execute(f"INSERT EDGE {edge}({', '.join(names)}) VALUES {vals}")


# ---------------------------------------------------------------------------
# workloads
# ---------------------------------------------------------------------------
# Short reads: profile lookup, 1-hop expands, property fetches, filtered expand.
SHORT_READS = [
    'FETCH PROP ON person "{p}" YIELD person.first_name AS first, person.last_name AS last, person.birthday AS bday',
    'GO FROM "{p}" OVER post_has_creator REVERSELY YIELD id($$) AS m, $$.post.creation_date AS ts'
    ' | ORDER BY $-.ts DESC | LIMIT 10',
    'GO FROM "{p}" OVER knows YIELD knows._dst AS friend, knows.creation_date AS since | ORDER BY $-.since DESC',
    'GO FROM "{p}" OVER post_has_creator REVERSELY YIELD id($$) AS m | FETCH PROP ON post $-.m YIELD post.content AS content',
    'GO FROM "{p}" OVER comment_has_creator REVERSELY YIELD id($$) AS c | GO FROM $-.c OVER reply_of_post YIELD id($$) AS m',
    'GO FROM "{p}" OVER has_member REVERSELY YIELD id($$) AS f | FETCH PROP ON forum $-.f YIELD forum.title AS title',
    'GO FROM "{p}" OVER post_has_creator REVERSELY YIELD id($$) AS m'
    ' | GO FROM $-.m OVER reply_of_post REVERSELY WHERE $$.comment.length > 3 YIELD id($$) AS c',
]

TWO_HOP = 'GO 2 STEPS FROM "{p}" OVER knows YIELD knows._dst AS d | YIELD COUNT(*) AS n'

# Inserts: new person, likes, forum membership, new content, new friendship.
INSERTS = [
    'INSERT VERTEX person(first_name, last_name, gender, birthday) VALUES "x{i}":("New", "User", "female", date("2000-01-01"))',
    'INSERT EDGE IF NOT EXISTS likes_post(creation_date) VALUES "x{i}"->"m{m}":({ts})',
    'INSERT EDGE IF NOT EXISTS likes_comment(creation_date) VALUES "x{i}"->"c{c}":({ts})',
    'INSERT VERTEX forum(title, creation_date) VALUES "xf{i}":("forum x{i}", {ts})',
    'INSERT EDGE IF NOT EXISTS has_member(join_date) VALUES "xf{i}"->"x{i}":({ts})',
    'INSERT VERTEX post(content, length, creation_date) VALUES "xm{i}":("hello graph", 11, {ts})',
    'INSERT EDGE IF NOT EXISTS post_has_creator() VALUES "xm{i}"->"x{i}":()',
    'INSERT EDGE IF NOT EXISTS knows(creation_date) VALUES "x{i}"->"{p}":({ts})',
]

WORKLOADS = ("short-reads", "two-hop", "inserts")


def statements_for(workload: str, seed) -> list[str]:
    if workload == "short-reads":
        return [t.format(p=seed) for t in SHORT_READS]
    if workload == "two-hop":
        return [TWO_HOP.format(p=seed)]
    if workload == "inserts":
        i, p, m, c = seed
        return [t.format(i=i, p=p, m=m, c=c, ts=_EPOCH + i) for t in INSERTS]
    raise ValueError(f"unknown workload {workload!r}")


def seeds_for(workload: str, data_dir: str, n: int, seed: int) -> list:
    """Uniform sample of person vids (insert seeds add fresh ids and targets)."""
    rng = random.Random(seed)
    persons = [v for v, _ in read_vertices(os.path.join(data_dir, vertex_file("person")), "person", [])]
    if not persons:
        return []
    picked = rng.sample(persons, min(n, len(persons)))
    if workload != "inserts":
        return picked
    counts = {t: max(1, sum(1 for _ in _rows(os.path.join(data_dir, vertex_file(t)), []))) for t in ("post", "comment")}
    return [(i, p, rng.randrange(counts["post"]), rng.randrange(counts["comment"])) for i, p in enumerate(picked)]


def knows_adjacency(data_dir: str) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {}
    for src, _, _, dst, _ in read_edges(os.path.join(data_dir, edge_file("knows")), "knows", []):
        adj.setdefault(src, []).append(dst)
    return adj


def two_hop_oracle(adj: dict[str, list[str]], p: str) -> int:
    """Number of 2-step walks from ``p``: one row per second-hop edge."""
    return sum(len(adj.get(d, ())) for d in adj.get(p, ()))


@dataclass
class SeriesPoint:
    threads: int
    qps: float
    latency_us: dict
    requests: int
    successes: int
    errors: int
    accuracy: float
    runs: list[float]


@dataclass
class BenchReport:
    workload: str
    seeds: int
    repeats: int
    series: list[SeriesPoint] = field(default_factory=list)
    oracle: Optional[dict] = None
    state_unchanged: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        head = f"{'threads':>7} {'qps':>10} {'p50_us':>9} {'p95_us':>9} {'p99_us':>9} {'requests':>8} {'accuracy':>8}"
        lines = [f"workload {self.workload}: {self.seeds} seeds x {self.repeats} runs", head]
        for s in self.series:
            lat = s.latency_us
            lines.append(f"{s.threads:>7} {s.qps:>10.1f} {lat['p50']:>9.0f} {lat['p95']:>9.0f} {lat['p99']:>9.0f} "
                         f"{s.requests:>8} {s.accuracy:>8.2%}")
        if self.oracle is not None:
            lines.append(f"oracle: {self.oracle['checked']} checked, {self.oracle['mismatches']} mismatches")
        if self.state_unchanged is not None:
            lines.append(f"state unchanged: {self.state_unchanged}")
        return "\n".join(lines)


def _one_run(target, workload: str, seeds: list, threads: int) -> tuple[float, list[float], int, int]:
    """One pass over ``seeds``; returns (wall seconds, group latencies us, requests, successes)."""
    q: queue.SimpleQueue = queue.SimpleQueue()
    for s in seeds:
        q.put(s)
    conns = [target.connect() for _ in range(threads)]
    for c in conns:
        c.execute(f"USE {SPACE}")
    lat: list[float] = []
    counts = [0, 0]
    mu = threading.Lock()
    start = threading.Barrier(threads + 1)

    def worker(conn):
        mine, req, ok = [], 0, 0
        start.wait()
        while True:
            try:
                seed = q.get_nowait()
            except queue.Empty:
                break
            group_us = 0.0
            for stmt in statements_for(workload, seed):
                req += 1
                t0 = time.perf_counter()
                try:
                    conn.execute(stmt)
                    ok += 1
                except (GraphError, OSError) as e:
                    log.info("request failed: %s", e)
                group_us += (time.perf_counter() - t0) * 1e6
            mine.append(group_us)
        with mu:
            lat.extend(mine)
            counts[0] += req
            counts[1] += ok

    ts = [threading.Thread(target=worker, args=(c,), daemon=True) for c in conns]
    for t in ts:
        t.start()
    start.wait()
    t0 = time.perf_counter()
    for t in ts:
        t.join()
    wall = time.perf_counter() - t0
    for c in conns:
        _close(c)
    return wall, lat, counts[0], counts[1]


def run(target, workload: str, seeds: list, thread_counts: list[int], repeats: int = REPEATS,
        data_dir: Optional[str] = None, oracle_fraction: float = 0.01, oracle_seed: int = 0) -> BenchReport:
    """Run ``workload`` once per thread count (``repeats`` passes each)."""
    if workload not in WORKLOADS:
        raise ValueError(f"unknown workload {workload!r}")
    report = BenchReport(workload, len(seeds), repeats)
    before = target.state_hash(SPACE) if workload != "inserts" else None
    for threads in thread_counts:
        lat: list[float] = []
        req = ok = 0
        qps_runs = []
        for _ in range(repeats):
            wall, l, r, s = _one_run(target, workload, seeds, threads)
            lat += l
            req += r
            ok += s
            qps_runs.append(len(l) / wall if wall > 0 else 0.0)
        lat.sort()
        report.series.append(SeriesPoint(
            threads=threads,
            qps=sum(qps_runs) / len(qps_runs),
            latency_us={"mean": sum(lat) / len(lat) if lat else 0.0, "p50": quantile(lat, 0.50),
                        "p95": quantile(lat, 0.95), "p99": quantile(lat, 0.99)},
            requests=req, successes=ok, errors=req - ok,
            accuracy=ok / req if req else 1.0, runs=qps_runs))
    if before is not None:
        report.state_unchanged = target.state_hash(SPACE) == before
    if workload == "two-hop" and data_dir is not None and seeds:
        report.oracle = cross_check(target, data_dir, seeds, oracle_fraction, oracle_seed)
    return report


def cross_check(target, data_dir: str, seeds: list, fraction: float = 0.01, seed: int = 0) -> dict:
    """Compare 2-hop counts on a sample of seeds (at least one) with the CSV oracle."""
    adj = knows_adjacency(data_dir)
    k = max(1, round(len(seeds) * fraction))
    sample = random.Random(seed).sample(seeds, min(k, len(seeds)))
    conn = target.connect()
    mismatches = []
    try:
        conn.execute(f"USE {SPACE}")
        for p in sample:
            got = conn.execute(TWO_HOP.format(p=p)).rows[0][0]
            want = two_hop_oracle(adj, p)
            if got != want:
                mismatches.append({"seed": p, "got": got, "want": want})
    finally:
        _close(conn)
    return {"checked": len(sample), "mismatches": len(mismatches), "details": mismatches}
