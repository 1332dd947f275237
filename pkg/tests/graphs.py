"""Random small graphs and the statement corpus shared by query and acceptance tests."""

import random

from kvgraph.cluster import Cluster

SPACE = "g"

SCHEMA = [
    "CREATE TAG player(name string NOT NULL, age int NOT NULL)",
    "CREATE TAG team(name string NOT NULL)",
    "CREATE EDGE follow(degree int NOT NULL)",
    "CREATE EDGE serve(start_year int NOT NULL, end_year int NOT NULL)",
    "CREATE TAG INDEX player_age ON player(age)",
    "CREATE TAG INDEX player_name ON player(name)",
    "CREATE TAG INDEX player_name_age ON player(name, age)",
    "CREATE TAG INDEX team_name ON team(name)",
    "CREATE EDGE INDEX follow_degree ON follow(degree)",
    "CREATE EDGE INDEX serve_years ON serve(start_year, end_year)",
]

NAMES = ["al", "bo", "cy", "di", "ed", "fa"]


def new_cluster(parts=4, hosts=("h1", "h2"), **kw) -> Cluster:
    c = Cluster(hosts=list(hosts), partition_num=parts, **kw)
    c.create_space(SPACE, partition_num=parts)
    c.execute(f"USE {SPACE}")
    for s in SCHEMA:
        c.execute(s)
    return c


def random_graph(rng: random.Random, n_players=30, n_teams=5, n_follow=90, n_serve=40):
    """Vertices ``{vid: (tag, props)}`` and edges ``[(src, type, rank, dst, props)]`` without key collisions."""
    verts = {}
    for i in range(n_players):
        verts[f"p{i}"] = ("player", {"name": rng.choice(NAMES), "age": rng.randrange(18, 45)})
    for i in range(n_teams):
        verts[f"t{i}"] = ("team", {"name": rng.choice(NAMES)})
    players = [v for v, (t, _) in verts.items() if t == "player"]
    teams = [v for v, (t, _) in verts.items() if t == "team"]
    edges = {}
    for _ in range(n_follow):
        k = (rng.choice(players), "follow", rng.randrange(0, 2), rng.choice(players))
        edges[k] = {"degree": rng.randrange(0, 100)}
    for _ in range(n_serve):
        start = rng.randrange(1995, 2020)
        k = (rng.choice(players), "serve", 0, rng.choice(teams))
        edges[k] = {"start_year": start, "end_year": start + rng.randrange(0, 8)}
    return verts, [(s, t, r, d, p) for (s, t, r, d), p in edges.items()]


def load(c: Cluster, verts, edges):
    st = c.storage
    st.insert_vertices(SPACE, [(v, {t: p}) for v, (t, p) in verts.items()])
    st.insert_edges(SPACE, edges)


# Statements over the schema above.  {p} and {q} are player vids.
CORPUS = [
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow WHERE follow.degree > 50 YIELD dst(EDGE) AS d, follow.degree AS w',
    'GO 2 STEPS FROM "{p}" OVER follow YIELD dst(EDGE) AS d',
    'GO 3 STEPS FROM "{p}" OVER follow YIELD src(EDGE) AS s, dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow REVERSELY YIELD src(EDGE) AS s',
    'GO FROM "{p}" OVER follow BIDIRECT YIELD id($$) AS n',
    'GO FROM "{p}", "{q}" OVER follow YIELD dst(EDGE) AS d',
    'GO FROM "{p}" OVER * YIELD dst(EDGE) AS d, type(EDGE) AS t',
    'GO FROM "{p}" OVER serve YIELD $$.team.name AS team, serve.start_year AS y',
    'GO FROM "{p}" OVER follow YIELD $$.player.name AS n, $$.player.age AS a',
    'GO FROM "{p}" OVER follow WHERE $$.player.age > 30 YIELD dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow WHERE follow.degree > 20 AND $^.player.age < 40 YIELD dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow YIELD DISTINCT dst(EDGE) AS d',
    'GO 2 STEPS FROM "{p}" OVER follow YIELD DISTINCT dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d | YIELD COUNT(*) AS n',
    'GO 2 STEPS FROM "{p}" OVER follow YIELD dst(EDGE) AS d | YIELD COUNT(*) AS n',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d | GO FROM $-.d OVER follow YIELD dst(EDGE) AS e',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree AS w | ORDER BY $-.w DESC, $-.d | LIMIT 3',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree AS w | ORDER BY $-.d, $-.w',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d | LIMIT 2',
    'GO FROM "{p}" OVER follow WHERE follow.degree >= 10 YIELD dst(EDGE) AS d | LIMIT 1, 2',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree AS w | GROUP BY $-.d YIELD $-.d AS d, SUM($-.w) AS s',
    'GO 2 STEPS FROM "{p}" OVER follow YIELD dst(EDGE) AS d | GROUP BY $-.d YIELD $-.d AS d, COUNT(*) AS n',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree AS w | YIELD $-.d AS d WHERE $-.w > 40',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree + 1 AS w | YIELD $-.w * 2 AS x',
    'GO FROM "{p}" OVER follow YIELD follow._dst AS d, follow._rank AS r',
    'GO FROM "{p}" OVER follow, serve YIELD dst(EDGE) AS d',
    'GO FROM "{p}" OVER follow REVERSELY WHERE follow.degree < 50 YIELD src(EDGE) AS s, follow.degree AS w',
    'GO 2 STEPS FROM "{p}" OVER follow BIDIRECT YIELD id($$) AS n | YIELD COUNT(*) AS n',
    'GO FROM "{p}" OVER follow WHERE follow.degree > 1000 YIELD dst(EDGE) AS d',
    'LOOKUP ON player WHERE player.age == 30 YIELD id(vertex) AS v',
    'LOOKUP ON player WHERE player.age > 25 AND player.age <= 35 YIELD id(vertex) AS v, player.age AS a',
    'LOOKUP ON player WHERE player.name == "al" YIELD id(vertex) AS v',
    'LOOKUP ON player WHERE player.name == "bo" AND player.age > 20 YIELD id(vertex) AS v',
    'LOOKUP ON player WHERE player.name >= "cy" YIELD player.name AS n',
    'LOOKUP ON team WHERE team.name == "di" YIELD id(vertex) AS v',
    'LOOKUP ON follow WHERE follow.degree < 10 YIELD src(EDGE) AS s, dst(EDGE) AS d',
    'LOOKUP ON serve WHERE serve.start_year == 2000 YIELD src(EDGE) AS s',
    'LOOKUP ON serve WHERE serve.start_year > 2005 AND serve.end_year < 2015 YIELD src(EDGE) AS s, dst(EDGE) AS d',
    'LOOKUP ON player WHERE player.age > 20 YIELD player.age AS a | ORDER BY $-.a | LIMIT 5',
    'LOOKUP ON player WHERE player.age < 40 YIELD player.name AS n | GROUP BY $-.n YIELD $-.n AS n, COUNT(*) AS c',
    'LOOKUP ON player WHERE player.age > 30 YIELD id(vertex) AS v | GO FROM $-.v OVER follow YIELD dst(EDGE) AS d',
    'FETCH PROP ON player "{p}", "{q}" YIELD player.name AS n, player.age AS a',
    'FETCH PROP ON follow "{p}" -> "{q}" YIELD follow.degree AS w',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d | FETCH PROP ON player $-.d YIELD player.age AS a',
    'YIELD 1 + 2 * 3 AS x',
    'YIELD "a" + "b" AS s, 7 % 3 AS m',
    'GO FROM "{p}" OVER follow YIELD dst(EDGE) AS d, follow.degree AS w | ORDER BY $-.w | LIMIT 4',
    'GO 3 STEPS FROM "{p}" OVER follow YIELD dst(EDGE) AS d | YIELD COUNT(*) AS n',
    'LOOKUP ON player YIELD id(vertex) AS v | YIELD COUNT(*) AS n',
]


def fill(template: str, rng: random.Random, players) -> str:
    return template.format(p=rng.choice(players), q=rng.choice(players))


# EXPLAIN output of a 2-step GO; plans do not depend on data, so this is stable
GOLDEN_GO2 = """\
+----+----------------+--------------+----------------------------------------------------------+
| id | name           | dependencies | operator info                                            |
+----+----------------+--------------+----------------------------------------------------------+
| 7  | Project_7      | 6            | columns: dst(EDGE) AS d                                  |
| 6  | GetNeighbors_6 | 5            | edges: follow; direction: out; filter: follow.degree > 1 |
| 5  | DataCollect_5  | 4            |                                                          |
| 4  | Loop_4         | 3 body:2     | iterations: 1                                            |
| 3  | Start_3        |              | vids: "a"                                                |
| 2  | Project_2      | 1            | columns: id($$) AS @vid                                  |
| 1  | GetNeighbors_1 | 0            | edges: follow; direction: out                            |
| 0  | LoopInput_0    |              |                                                          |
+----+----------------+--------------+----------------------------------------------------------+"""
