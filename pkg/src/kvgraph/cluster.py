"""In-process cluster: meta group, storage partitions and the graph service on one network."""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from typing import Optional

from .kvstore import Disk, FileDisk, MemoryDisk
from .meta import Catalog, MetaService
from .raft.group import ReplicatedGroup
from .raft.network import RaftNetwork
from .raft.transport import SimTransport
from .storage import StorageService


@dataclass
class ClusterConfig:
    hosts: list[str] = field(default_factory=lambda: ["h1"])
    meta_replicas: int = 0  # 0: min(3, len(hosts))
    partition_num: int = 10
    replica_factor: int = 1
    vid_len: int = 16
    kv_separation: bool = False
    data_dir: Optional[str] = None  # None keeps every disk in memory
    fsync: bool = False
    seed: int = 0
    drop: float = 0.0
    rpc_delay: float = 0.0
    slow_query_ms: float = 1000.0
    name: str = "primary"


class Cluster:
    def __init__(self, config: Optional[ClusterConfig] = None, **overrides):
        cfg = config or ClusterConfig()
        for k, v in overrides.items():
            setattr(cfg, k, v)
        if len(set(cfg.hosts)) != len(cfg.hosts):
            from .errors import ConfigError

            raise ConfigError(f"duplicate host ids in {cfg.hosts}")
        self.config = cfg
        self.lock = threading.RLock()
        self.down: set[str] = set()
        self.transport = SimTransport(seed=cfg.seed, delay=(0, 0), drop=cfg.drop)
        self.network = RaftNetwork(self.transport)
        self.disks: dict[str, Disk] = {h: self._disk(h) for h in cfg.hosts}
        n_meta = cfg.meta_replicas or min(3, len(cfg.hosts))
        self.meta_group = ReplicatedGroup(self.network, "meta", cfg.hosts[:n_meta], lambda h: Catalog())
        self.meta_group.bootstrap()
        self.meta = MetaService(self.meta_group)
        self.storage = StorageService(
            self.network, self.meta, self.disks, cfg.kv_separation, self.lock, cfg.rpc_delay
        )
        self.meta.on_change(self._on_meta_change)
        self.meta.add_hosts(cfg.hosts)
        from .query.engine import GraphService

        self.graph = GraphService(self)

    def _disk(self, host: str) -> Disk:
        if self.config.data_dir is None:
            return MemoryDisk()
        return FileDisk(os.path.join(self.config.data_dir, host), self.config.fsync)

    def _on_meta_change(self, cmd: dict, result):
        op = cmd["op"]
        if op == "create_space":
            self.storage.ensure_space(cmd["name"])
        elif op == "drop_space" and result is not None:
            self.storage.drop_space_groups(result)

    # -- convenience -----------------------------------------------------
    def create_space(self, name: str, partition_num: Optional[int] = None, replica_factor: Optional[int] = None, vid_len: Optional[int] = None, if_not_exists: bool = False) -> int:
        cfg = self.config
        with self.lock:
            return self.meta.create_space(
                name,
                partition_num or cfg.partition_num,
                replica_factor or cfg.replica_factor,
                vid_len or cfg.vid_len,
                if_not_exists,
            )

    def session(self, user: str = "root", password: str = "root"):
        return self.graph.open_session(user, password)

    def execute(self, text: str, session=None):
        """Run one statement in a throwaway (or the given) session; raises on error."""
        s = session or self.graph.default_session()
        return self.graph.execute(s, text)

    # -- hosts -----------------------------------------------------------
    def add_host(self, host: str):
        with self.lock:
            if host not in self.disks:
                self.disks[host] = self._disk(host)
            self.meta.add_hosts([host])

    def remove_host(self, host: str) -> list:
        with self.lock:
            moves = self.meta.remove_hosts([host])
            for sid, part, src, dst in moves:
                self._move(sid, part, src, dst)
            return moves

    def balance(self) -> list:
        with self.lock:
            return self.meta.balance(self._move)

    def _move(self, sid: int, part: int, src: str, dst: Optional[str]):
        """Stop-copy move of one replica of ``(sid, part)`` from ``src`` to ``dst``."""
        g = self.storage.group(sid, part)
        new_hosts = [h for h in g.hosts if h != src]
        if dst is not None:
            new_hosts.append(dst)

        def copy_replica(source: str, target: str):
            snap = g.sms[source].kv.checkpoint()
            kv = self.storage._make_sm(sid, part)(target).kv
            kv.restore(snap)

        g.reconfigure(new_hosts, copy_replica)
        if src in self.disks:
            self.disks[src].remove_tree(f"{sid}/{part}")
        self.storage._recovered_term[(sid, part)] = -1

    def crash_host(self, host: str):
        with self.lock:
            if host in self.meta_group.hosts:
                self.meta_group.crash(host)
            self.storage.crash_host(host)
            self.down.add(host)

    def restart_host(self, host: str):
        with self.lock:
            if host in self.meta_group.hosts and not self.meta_group.alive(host):
                self.meta_group.restart(host)
            self.storage.restart_host(host)
            self.down.discard(host)

    def tick(self, n: int = 1):
        with self.lock:
            self.network.tick(n)

    def state_hash(self, space: str) -> str:
        return self.storage.state_hash(space)
