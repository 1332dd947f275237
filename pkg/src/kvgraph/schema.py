"""Property types and versioned tag/edge-type schemas."""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ValueTypeError

PropertyValue = Any  # None | bool | int | float | str | date | datetime

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


class PropertyType(enum.Enum):
    BOOL = "bool"
    INT64 = "int64"
    DOUBLE = "double"
    STRING = "string"
    DATE = "date"
    DATETIME = "datetime"

    @classmethod
    def parse(cls, name: str) -> "PropertyType":
        key = name.strip().lower()
        if key.startswith("fixed_string"):
            return cls.STRING
        alias = {
            "bool": cls.BOOL,
            "boolean": cls.BOOL,
            "int": cls.INT64,
            "int64": cls.INT64,
            "int32": cls.INT64,
            "int16": cls.INT64,
            "int8": cls.INT64,
            "float": cls.DOUBLE,
            "double": cls.DOUBLE,
            "string": cls.STRING,
            "date": cls.DATE,
            "datetime": cls.DATETIME,
            "timestamp": cls.DATETIME,
        }
        try:
            return alias[key]
        except KeyError:
            raise ValueTypeError(f"unknown property type {name!r}") from None


def type_of(value: PropertyValue) -> Optional[PropertyType]:
    """Runtime type of a value; ``None`` for Null."""
    if value is None:
        return None
    if isinstance(value, bool):
        return PropertyType.BOOL
    if isinstance(value, int):
        return PropertyType.INT64
    if isinstance(value, float):
        return PropertyType.DOUBLE
    if isinstance(value, str):
        return PropertyType.STRING
    if isinstance(value, dt.datetime):
        return PropertyType.DATETIME
    if isinstance(value, dt.date):
        return PropertyType.DATE
    raise ValueTypeError(f"unsupported value {value!r}")


def coerce_value(ptype: PropertyType, value: PropertyValue) -> PropertyValue:
    """Check ``value`` against ``ptype``; ints widen to double, nothing else converts."""
    actual = type_of(value)
    if actual is None or actual is ptype:
        if actual is PropertyType.INT64 and not INT64_MIN <= value <= INT64_MAX:
            raise ValueTypeError(f"integer {value} out of int64 range")
        return value
    if ptype is PropertyType.DOUBLE and actual is PropertyType.INT64:
        return float(value)
    raise ValueTypeError(f"expected {ptype.value}, got {actual.value} value {value!r}")


@dataclass(frozen=True)
class PropDef:
    name: str
    type: PropertyType
    nullable: bool = True
    default: PropertyValue = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "type": self.type.value,
            "nullable": self.nullable,
            "default": encode_json_value(self.default),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PropDef":
        return cls(d["name"], PropertyType(d["type"]), d["nullable"], decode_json_value(d["default"]))


@dataclass(frozen=True)
class Schema:
    """One version of a tag or edge-type property list."""

    version: int
    props: tuple[PropDef, ...]

    def index_of(self, name: str) -> int:
        for i, p in enumerate(self.props):
            if p.name == name:
                return i
        return -1

    def prop(self, name: str) -> Optional[PropDef]:
        i = self.index_of(name)
        return None if i < 0 else self.props[i]

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.props]


@dataclass
class SchemaDef:
    """A tag or edge type with its full version history (never truncated)."""

    name: str
    id: int
    is_edge: bool
    versions: list[Schema] = field(default_factory=list)

    @property
    def latest(self) -> Schema:
        return self.versions[-1]

    def version(self, v: int) -> Schema:
        if 0 <= v < len(self.versions) and self.versions[v].version == v:
            return self.versions[v]
        for s in self.versions:
            if s.version == v:
                return s
        raise ValueTypeError(f"{self.name}: unknown schema version {v}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "id": self.id,
            "is_edge": self.is_edge,
            "versions": [[p.to_json() for p in s.props] for s in self.versions],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SchemaDef":
        versions = [Schema(i, tuple(PropDef.from_json(p) for p in props)) for i, props in enumerate(d["versions"])]
        return cls(d["name"], d["id"], d["is_edge"], versions)


def build_row(schema: Schema, names: list[str], values: list[PropertyValue]) -> list[PropertyValue]:
    """Align user-supplied (names, values) to schema order, filling defaults.

    Raises ``ValueTypeError`` for unknown names, arity mismatch, type mismatch
    or a missing NOT NULL property without default.
    """
    from .errors import UnknownProperty

    if len(names) != len(values):
        raise ValueTypeError(f"{len(names)} property names but {len(values)} values")
    given: dict[str, PropertyValue] = {}
    for n, v in zip(names, values):
        if schema.prop(n) is None:
            raise UnknownProperty(f"unknown property {n!r}")
        given[n] = v
    row = []
    for p in schema.props:
        if p.name in given:
            v = coerce_value(p.type, given[p.name])
        else:
            v = p.default
        if v is None and not p.nullable:
            raise ValueTypeError(f"property {p.name!r} is NOT NULL")
        row.append(v)
    return row


# JSON helpers shared by catalog dumps and the wire protocol.
def encode_json_value(v: PropertyValue):
    if isinstance(v, dt.datetime):
        return {"datetime": v.isoformat()}
    if isinstance(v, dt.date):
        return {"date": v.isoformat()}
    if isinstance(v, float) and not math.isfinite(v):
        return {"double": repr(v)}
    return v


def decode_json_value(v):
    if isinstance(v, dict):
        if "datetime" in v:
            return dt.datetime.fromisoformat(v["datetime"])
        if "date" in v:
            return dt.date.fromisoformat(v["date"])
        if "double" in v:
            return float(v["double"])
    return v
