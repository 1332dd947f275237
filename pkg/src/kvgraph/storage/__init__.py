"""Storage service: graph records over replicated kv partitions."""

from .replica import PartReplica
from .service import BOTH, StorageService, StorageStats

__all__ = ["BOTH", "PartReplica", "StorageService", "StorageStats"]
