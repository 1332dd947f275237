"""Exception hierarchy shared by every layer.

Each exception class carries a stable numeric ``code`` so the wire protocol
can report failures without leaking Python class names.
"""

from __future__ import annotations


class GraphError(Exception):
    code = -1

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details


# codec / kvstore
class EncodingError(GraphError):
    code = -1001


class IndexEncodingError(EncodingError):
    code = -1002


class ValueTypeError(GraphError):
    """A value does not match the declared property type."""

    code = -1003


class PartNotFound(GraphError):
    code = -1101


class ChecksumError(GraphError):
    code = -1102


# raft
class NotLeader(GraphError):
    code = -1201

    def __init__(self, message: str = "", leader_hint=None):
        super().__init__(message or f"not leader (hint={leader_hint})")
        self.leader_hint = leader_hint


class QuorumTimeout(GraphError):
    code = -1202


class TransferTimeout(GraphError):
    code = -1203


# meta
class DuplicateName(GraphError):
    code = -1301


class UnknownSpace(GraphError):
    code = -1302


class UnknownTag(GraphError):
    code = -1303


class UnknownEdge(GraphError):
    code = -1304


class UnknownIndex(GraphError):
    code = -1305


class UnknownProperty(GraphError):
    code = -1306


class DependentIndexExists(GraphError):
    code = -1307


class HostNotEmpty(GraphError):
    code = -1308


class BalanceInProgress(GraphError):
    code = -1309


class UnknownQueryId(GraphError):
    code = -1310


class UnknownHost(GraphError):
    code = -1311


class PermissionDenied(GraphError):
    code = -1312


class AuthFailed(GraphError):
    code = -1313


class UnknownUser(GraphError):
    code = -1314


class NotEnoughHosts(GraphError):
    code = -1315


# storage
class Retryable(GraphError):
    code = -1401


class ReadOnlyCluster(GraphError):
    code = -1402


class NodeDown(GraphError):
    code = -1403


# query
class QuerySyntaxError(GraphError):
    code = -1501

    def __init__(self, message: str, line: int = 0, column: int = 0, expected=()):
        detail = f"{message} at line {line}, column {column}"
        if expected:
            detail += f"; expected one of: {', '.join(sorted(set(expected)))}"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))


class SemanticError(GraphError):
    code = -1502


class NoSpaceSelected(SemanticError):
    code = -1503


class ExecutionError(GraphError):
    code = -1504

    def __init__(self, message: str = "", node_id=None):
        super().__init__(message if node_id is None else f"{message} (node {node_id})")
        self.node_id = node_id


class KilledError(GraphError):
    code = -1505


class RuleBudgetExceeded(GraphError):
    code = -1506


# replication / server
class UnregisteredDrainer(GraphError):
    code = -1601


class ConfigError(GraphError):
    code = -1701


class ProtocolError(GraphError):
    code = -1702


class UnknownSession(GraphError):
    code = -1703
