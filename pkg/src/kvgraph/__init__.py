"""Partitioned property-graph database with key-value encoding, Raft replication and a query pipeline."""

__version__ = "0.1.0"
