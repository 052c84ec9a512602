"""Render tree: the resolved view of a document handed to clients.

Nodes are immutable; the access and adaptation passes rebuild trees rather
than mutating them. The wire shape puts optional fields (``text``,
``stale``, ``origin``, ``annotations``) on the node only when meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .model import EntityRef

TEXT_SPAN = "text_span"
COMPOSITE = "composite"
TRANSCLUSION = "transclusion"
REDACTED = "redacted"
STALE = "stale"
UNRESOLVED_REMOTE = "unresolved_remote"
DEPTH_LIMIT = "depth_limit"
CYCLE = "cycle"

NODE_KINDS = (
    TEXT_SPAN,
    COMPOSITE,
    TRANSCLUSION,
    REDACTED,
    STALE,
    UNRESOLVED_REMOTE,
    DEPTH_LIMIT,
    CYCLE,
)

_MARKER_TEXT = {
    REDACTED: "[redacted]",
    CYCLE: "[cycle]",
    DEPTH_LIMIT: "[depth]",
    UNRESOLVED_REMOTE: "[unresolved]",
}

# annotation keys written by the renderer
ANN_VARIANT_GROUP = "variant_group"
ANN_LAYOUT = "layout"
LAYOUT_INLINE = "inline"


@dataclass(frozen=True)
class RenderNode:
    kind: str
    entity: EntityRef
    text: str | None = None
    children: tuple["RenderNode", ...] = ()
    accessible: bool = True
    stale: bool = False
    origin: EntityRef | None = None
    annotations: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(
            self, "annotations", MappingProxyType(dict(self.annotations))
        )

    def with_children(self, children: tuple["RenderNode", ...]) -> "RenderNode":
        return replace(self, children=children)


@dataclass(frozen=True)
class RenderTree:
    root: RenderNode


def flatten(node: RenderNode | RenderTree) -> str:
    """In-order concatenation of span text; markers become literal tags."""
    if isinstance(node, RenderTree):
        node = node.root
    if node.kind in (TEXT_SPAN, STALE):
        return node.text or ""
    if node.kind in _MARKER_TEXT:
        return _MARKER_TEXT[node.kind]
    return "".join(flatten(child) for child in node.children)


def node_to_wire(node: RenderNode) -> dict:
    out: dict = {
        "kind": node.kind,
        "entity": node.entity.to_wire(),
        "accessible": node.accessible,
        "children": [node_to_wire(c) for c in node.children],
    }
    if node.text is not None:
        out["text"] = node.text
    if node.stale:
        out["stale"] = True
    if node.origin is not None:
        out["origin"] = node.origin.to_wire()
    if node.annotations:
        out["annotations"] = dict(node.annotations)
    return out


def node_from_wire(raw: Mapping) -> RenderNode:
    origin = raw.get("origin")
    return RenderNode(
        kind=raw["kind"],
        entity=EntityRef.from_wire(raw["entity"]),
        text=raw.get("text"),
        children=tuple(node_from_wire(c) for c in raw.get("children", ())),
        accessible=raw.get("accessible", True),
        stale=raw.get("stale", False),
        origin=EntityRef.from_wire(origin) if origin else None,
        annotations=raw.get("annotations", {}),
    )


def tree_to_wire(tree: RenderTree) -> dict:
    return {"root": node_to_wire(tree.root)}


def tree_from_wire(raw: Mapping) -> RenderTree:
    return RenderTree(root=node_from_wire(raw["root"]))
