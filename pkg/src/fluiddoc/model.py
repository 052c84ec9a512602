"""Entity types for the resource/selector/link graph.

Everything in the graph is an entity with a 128-bit random identifier.
Resources carry media; selectors address a character range of a text
resource against the content fingerprint captured at creation time; links
are first-class associations between non-empty source and target sets.

All objects here are immutable snapshots: the store hands them out across
threads without copying.
"""

from __future__ import annotations

import secrets
import uuid
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

TEXT = "text"
IMAGE = "image"
COMPOSITE = "composite"
MEDIA_TYPES = (TEXT, IMAGE, COMPOSITE)

NAVIGATIONAL = "navigational"
STRUCTURAL = "structural"
TRANSCLUSION = "transclusion"
LINK_KINDS = (NAVIGATIONAL, STRUCTURAL, TRANSCLUSION)

ORDER_PROPERTY = "order"
CONTEXT_PROPERTY_PREFIX = "ctx:"


def new_entity_id() -> str:
    """Fresh 128-bit random id, canonical lowercase hyphenated hex."""
    return str(uuid.UUID(bytes=secrets.token_bytes(16)))


@dataclass(frozen=True, order=True)
class EntityRef:
    """Reference to an entity, either on this store (``store is None``) or
    on a peer store addressed by its base URI."""

    id: str
    store: str | None = None

    @property
    def is_local(self) -> bool:
        return self.store is None

    def sort_key(self) -> tuple[str, str]:
        return (self.store or "", self.id)

    def to_wire(self) -> dict:
        if self.store is None:
            return {"id": self.id}
        return {"store": self.store, "id": self.id}

    @classmethod
    def from_wire(cls, raw: Mapping) -> "EntityRef":
        store = raw.get("store")
        return cls(id=str(raw["id"]), store=str(store) if store else None)


def local_ref(entity_id: str) -> EntityRef:
    return EntityRef(id=entity_id)


def _freeze_properties(obj) -> None:
    props = dict(obj.properties)
    object.__setattr__(obj, "properties", MappingProxyType(props))


@dataclass(frozen=True)
class Resource:
    id: str
    media_type: str
    name: str
    content: str | None  # fingerprint; None for composites
    properties: Mapping[str, str] = field(default_factory=dict)
    seq: int = 0

    def __post_init__(self):
        _freeze_properties(self)


@dataclass(frozen=True)
class Selector:
    """Addresses ``[start, end)`` (Unicode scalar offsets, end exclusive) of
    the text blob identified by ``bound_fingerprint``."""

    id: str
    resource: str
    bound_fingerprint: str
    start: int
    end: int
    properties: Mapping[str, str] = field(default_factory=dict)
    seq: int = 0

    def __post_init__(self):
        _freeze_properties(self)


@dataclass(frozen=True)
class Link:
    id: str
    kind: str
    sources: tuple[EntityRef, ...]
    targets: tuple[EntityRef, ...]
    properties: Mapping[str, str] = field(default_factory=dict)
    seq: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "targets", tuple(self.targets))
        _freeze_properties(self)

    def order_value(self) -> int:
        raw = self.properties.get(ORDER_PROPERTY, "0")
        try:
            return int(raw)
        except ValueError:
            return 0


@dataclass(frozen=True)
class User:
    id: str
    name: str
    token: str
    properties: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        _freeze_properties(self)


PUBLIC = "PUBLIC"


@dataclass(frozen=True)
class RightsSpec:
    """Per-entity rights. ``readers`` may contain the ``PUBLIC`` sentinel;
    the owner is implicitly a reader and an editor."""

    entity: str
    owner: str
    readers: frozenset[str] = frozenset()
    editors: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "readers", frozenset(self.readers))
        object.__setattr__(self, "editors", frozenset(self.editors))

    def allows_read(self, user_id: str | None) -> bool:
        if PUBLIC in self.readers:
            return True
        if user_id is None:
            return False
        return user_id == self.owner or user_id in self.readers

    def allows_edit(self, user_id: str | None) -> bool:
        if user_id is None:
            return False
        return user_id == self.owner or user_id in self.editors


def new_token() -> str:
    return secrets.token_urlsafe(24)


def validate_properties(props: Mapping[str, str]) -> dict[str, str]:
    """Keys must be unique non-empty text; values are text."""
    out: dict[str, str] = {}
    for key, value in props.items():
        if not isinstance(key, str) or not key:
            raise ValueError("property keys must be non-empty strings")
        out[key] = str(value)
    return out
