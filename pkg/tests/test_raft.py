import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvgraph.errors import NotLeader, QuorumTimeout, TransferTimeout
from kvgraph.kvstore import MemoryDisk
from kvgraph.raft.group import ReplicatedGroup
from kvgraph.raft.listener import subscribe_listener
from kvgraph.raft.network import RaftNetwork
from kvgraph.raft.node import CANDIDATE, LEADER, LISTENER, RaftNode, VoteRequest
from kvgraph.raft.sim import RaftSim, load_scenario, random_faults, run_scenario, write_trace
from kvgraph.raft.transport import SimTransport


class ListSM:
    def __init__(self):
        self.applied = []

    def apply(self, index, payload):
        self.applied.append((index, payload))
        return payload

    def applied_index(self):
        return self.applied[-1][0] if self.applied else 0


def _group(hosts=("a", "b", "c"), seed=0):
    net = RaftNetwork(SimTransport(seed=seed, delay=(0, 0)))
    sms = {}

    def make(h):
        sms.setdefault(h, ListSM())
        return sms[h]

    return net, ReplicatedGroup(net, "g", list(hosts), make), sms


@pytest.mark.parametrize("seed", range(20))
def test_three_voters_elect_one_leader(seed):
    sim = RaftSim(voters=3, seed=seed)
    for t in range(200):
        sim.tick()
        if sim.leader() is not None:
            break
    assert sim.leader() is not None
    assert sum(sim.net.nodes[i].role == LEADER for i in sim.voter_ids) == 1


def test_single_node_elects_itself():
    sim = RaftSim(voters=1, seed=3)
    sim.tick(20)
    assert sim.leader() is not None and sim.leader().id == 0


def test_listener_never_requests_votes():
    node = RaftNode("l", voters=["a", "b"], listeners=["l"])
    for _ in range(200):
        node.tick()
    assert node.role == LISTENER
    assert not any(isinstance(m, VoteRequest) for m in node.drain())
    node.campaign()
    assert node.role == LISTENER


def test_commit_with_one_voter_down():
    net, g, sms = _group()
    g.bootstrap("a")
    g.crash("c")
    assert g.propose("x") == "x"
    assert ("x" in [p for _, p in sms["a"].applied]) and ("x" in [p for _, p in sms["b"].applied])


def test_no_commit_without_quorum():
    net, g, sms = _group()
    g.bootstrap("a")
    g.crash("b")
    g.crash("c")
    with pytest.raises((QuorumTimeout, NotLeader)):
        g.propose("x", max_ticks=50)
    assert all(p != "x" for _, p in sms["a"].applied)


def test_propose_on_follower_is_not_leader():
    net, g, _ = _group()
    g.bootstrap("a")
    with pytest.raises(NotLeader) as e:
        g.nodes["b"].propose("x")
    assert e.value.leader_hint == g.node_id("a")


def test_listener_catches_up_after_downtime():
    net, g, sms = _group()
    g.bootstrap("a")
    got = []
    disk = MemoryDisk()
    node = g.add_listener("l")
    h = subscribe_listener(node, lambda i, t, p: got.append((i, p)) or True, disk, "l")
    g.crash("l")
    for i in range(100):
        g.propose(f"e{i}")
    g.restart("l")
    h.rebind(g.nodes["l"])
    for _ in range(50):
        net.tick()
        h.pump()
    payloads = [p for _, p in got if p is not None]
    assert payloads == [f"e{i}" for i in range(100)]
    assert [i for i, _ in got] == list(range(1, len(got) + 1))


def test_sink_dropping_every_third_delivery_gets_everything():
    net, g, _ = _group()
    g.bootstrap("a")
    calls = {"n": 0}
    got = []

    def flaky(i, t, p):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            return False
        got.append(i)
        return True

    h = subscribe_listener(g.add_listener("l"), flaky, MemoryDisk(), "l")
    for i in range(30):
        g.propose(i)
    for _ in range(100):
        h.pump()
    assert got == list(range(1, g.nodes["a"].commit_index + 1))
    assert h.failures > 0


def test_empty_log_ships_nothing():
    net, g, _ = _group()
    got = []
    h = subscribe_listener(g.add_listener("l"), lambda *a: got.append(a) or True, MemoryDisk(), "l")
    assert h.pump() == 0 and got == []


def test_listener_progress_survives_restart():
    net, g, _ = _group()
    g.bootstrap("a")
    disk = MemoryDisk()
    got = []
    sink = lambda i, t, p: got.append(i) or True  # noqa: E731
    h = subscribe_listener(g.add_listener("l"), sink, disk, "l")
    for i in range(5):
        g.propose(i)
    h.pump()
    n = len(got)
    h2 = subscribe_listener(g.nodes["l"], sink, disk, "l")
    assert h2.shipped == n and h2.pump() == 0


def test_voter_cannot_be_subscribed():
    net, g, _ = _group()
    with pytest.raises(ValueError):
        subscribe_listener(g.nodes["a"], lambda *a: True, MemoryDisk())


def test_transfer_leader():
    net, g, _ = _group()
    g.bootstrap("a")
    g.transfer_leader("b")
    assert g.leader_host() == "b"
    g.transfer_leader("b")
    assert g.leader_host() == "b"


def test_transfer_to_partitioned_target_times_out():
    sim = RaftSim(voters=3, seed=5)
    sim.tick(100)
    ld = sim.leader()
    target = next(i for i in sim.voter_ids if i != ld.id)
    sim.partition([[target], [i for i in sim.voter_ids if i != target]])
    with pytest.raises(TransferTimeout):
        sim.transfer_leader(target, max_ticks=30)


def test_scenario_file_and_trace(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"voters": 3, "listeners": 1, "seed": 4, "ticks": 800,
                                "faults": [{"at": 100, "op": "crash", "node": 0},
                                           {"at": 300, "op": "restart", "node": 0}]}))
    report, trace = run_scenario(load_scenario(str(path)))
    assert report.ok, report.violations
    assert any(ev["event"] == "crash" for ev in trace)
    write_trace(trace, str(tmp_path / "t.jsonl"))
    assert (tmp_path / "t.jsonl").read_text().count("\n") == len(trace)


def test_random_faults_deterministic():
    assert random_faults(9, 5000, 4, [3]) == random_faults(9, 5000, 4, [3])


def test_transport_is_deterministic():
    def run(seed):
        sim = RaftSim(voters=3, listeners=1, seed=seed, drop=0.1, trace=True)
        sim.run(600, random_faults(seed, 600, 4, [3]))
        return sim.trace

    assert run(11) == run(11)


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from([3, 5]), st.floats(0, 0.15))
def test_safety_under_random_faults(seed, voters, drop):
    report, _ = run_scenario({"voters": voters, "listeners": 1, "seed": seed, "ticks": 1500,
                              "faults": "random", "drop": drop, "sink_drop": 0.1, "trace": False})
    assert report.ok, report.violations
    assert all(len(v) == 1 for v in report.leaders_by_term.values())
    assert not any(CANDIDATE in str(v) for v in report.violations)
