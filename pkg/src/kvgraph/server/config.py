"""Node configuration: a flat ``key = value`` file, overridable from the CLI."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

from ..cluster import ClusterConfig
from ..errors import ConfigError

ROLES = {"meta", "storage", "graph"}


@dataclass
class ServerConfig:
    node_id: str = "node1"
    roles: list = field(default_factory=lambda: sorted(ROLES))
    peers: list = field(default_factory=list)  # every host of the cluster; defaults to [node_id]
    data_dir: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = 9669
    partition_num: int = 10
    replica_factor: int = 1
    vid_len: int = 16
    slow_query_ms: float = 1000.0
    kv_separation: bool = False
    log_dir: Optional[str] = None
    log_max_bytes: int = 1 << 20
    log_backups: int = 3

    def validate(self):
        bad = set(self.roles) - ROLES
        if bad:
            raise ConfigError(f"unknown roles {sorted(bad)}; expected a subset of {sorted(ROLES)}")
        if not self.roles:
            raise ConfigError("at least one role is required")
        hosts = self.hosts
        if len(set(hosts)) != len(hosts):
            raise ConfigError(f"duplicate host ids in peers {hosts}")
        if self.node_id not in hosts:
            raise ConfigError(f"node_id {self.node_id!r} is not in peers {hosts}")
        if not 0 <= self.port < 65536:
            raise ConfigError(f"port {self.port} out of range")
        for name in ("partition_num", "replica_factor", "vid_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        return self

    @property
    def hosts(self) -> list:
        return list(self.peers) if self.peers else [self.node_id]

    def cluster_config(self) -> ClusterConfig:
        return ClusterConfig(
            hosts=self.hosts,
            partition_num=self.partition_num,
            replica_factor=self.replica_factor,
            vid_len=self.vid_len,
            kv_separation=self.kv_separation,
            data_dir=self.data_dir,
            slow_query_ms=self.slow_query_ms,
            name=self.node_id,
        )


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    if name in ("roles", "peers"):
        return [x.strip() for x in raw.split(",") if x.strip()]
    if isinstance(default, bool):
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        raw = raw[1:-1]
    return raw or None


def parse_config(text: str, overrides: Optional[dict] = None) -> ServerConfig:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        cp.read_string("[node]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"bad config: {e}") from None
    cfg = ServerConfig()
    known = {f.name: f for f in fields(cfg)}
    for key, raw in cp["node"].items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _convert(key, raw, getattr(ServerConfig(), key)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            value = _convert(key, value, getattr(ServerConfig(), key))
        setattr(cfg, key, value)
    return cfg.validate()


def load_config(path: Optional[str], overrides: Optional[dict] = None) -> ServerConfig:
    text = ""
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path!r}: {e}") from None
    return parse_config(text, overrides)
