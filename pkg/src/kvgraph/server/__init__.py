"""Process composition: config, wire protocol, metrics, logs, TCP server and REPL."""

from .client import Client
from .config import ServerConfig, load_config
from .metrics import MetricsRegistry
from .node import Server, serve

__all__ = ["Client", "MetricsRegistry", "Server", "ServerConfig", "load_config", "serve"]
