"""Simplified Raft: elections, log replication and non-voting listeners."""

from .listener import ListenerHandle, subscribe_listener
from .network import RaftNetwork
from .node import (
    CANDIDATE,
    FOLLOWER,
    LEADER,
    LISTENER,
    AppendReply,
    AppendRequest,
    RaftDurable,
    RaftNode,
    TimeoutNow,
    VoteReply,
    VoteRequest,
)
from .sim import RaftSim, SimReport, random_faults, run_scenario
from .transport import SimTransport

__all__ = [
    "CANDIDATE",
    "FOLLOWER",
    "LEADER",
    "LISTENER",
    "AppendReply",
    "AppendRequest",
    "ListenerHandle",
    "RaftDurable",
    "RaftNetwork",
    "RaftNode",
    "RaftSim",
    "SimReport",
    "SimTransport",
    "TimeoutNow",
    "VoteReply",
    "VoteRequest",
    "random_faults",
    "run_scenario",
    "subscribe_listener",
]
