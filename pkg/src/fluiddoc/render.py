"""Resolution of selectors, composition and transclusion into render trees.

Rendering walks the entity graph depth-first. Composites expand their
structural children in slot order; text resources become text spans; a
transclusion anchor (a selector targeted by a transclusion link) splits
the enclosing span and injects the rendered origin at the anchor's start
offset, the anchor range itself being a placeholder that is never emitted.

Selectors resolve against the content fingerprint captured at their
creation (snapshot mode) or against the resource's current content (live
mode). Edits never fail a snapshot render: the text is served from the
bound blob and flagged stale.

Termination is guaranteed twice over: entities on the current expansion
path render as cycle leaves when revisited, and every transclusion hop
consumes one unit of depth until ``max_depth`` yields depth-limit leaves.
Structural recursion does not consume depth; the local structural graph
is acyclic by construction.

Remote references are expanded from fetched entity records and
fingerprint-verified blobs. An unreachable or missing peer degrades only
the affected subtree to an unresolved marker; tampered content aborts the
render with an integrity error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from . import access, adaptation
from . import tree as rtree
from .errors import (
    FluidError,
    IntegrityMismatch,
    RangeOutOfBounds,
    UnknownEntity,
)
from .model import (
    COMPOSITE,
    CONTEXT_PROPERTY_PREFIX,
    IMAGE,
    STRUCTURAL,
    EntityRef,
    Link,
    Resource,
    Selector,
    local_ref,
)
from .store import DocumentStore
from .tree import RenderNode, RenderTree

SNAPSHOT = "snapshot"
LIVE = "live"


@dataclass(frozen=True)
class RenderOptions:
    mode: str = SNAPSHOT
    max_depth: int = 16
    context: Mapping[str, str] = field(default_factory=dict)
    user: str | None = None

    def __post_init__(self):
        if self.mode not in (SNAPSHOT, LIVE):
            raise ValueError(f"unknown render mode {self.mode!r}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


class Renderer:
    def __init__(self, store: DocumentStore, federation=None):
        self.store = store
        self.federation = federation

    # ------------------------------------------------------------------

    def resolve_selector(
        self, selector_id: str, mode: str = SNAPSHOT
    ) -> tuple[str, bool]:
        """Selector text plus a staleness flag (bound snapshot != current)."""
        sel = self.store.get_selector(selector_id)
        res = self.store.get_resource(sel.resource)
        stale = res.content != sel.bound_fingerprint
        if mode == LIVE:
            text = self.store.resource_text(res)
            if sel.end > len(text):
                raise RangeOutOfBounds(
                    f"selector range ({sel.start}, {sel.end}) no longer fits "
                    f"content of length {len(text)}"
                )
            return text[sel.start:sel.end], stale
        text = self.store.resource_text(res, sel.bound_fingerprint)
        return text[sel.start:sel.end], stale

    # ------------------------------------------------------------------

    def render(self, ref: EntityRef, options: RenderOptions | None = None) -> RenderTree:
        """Resolve, adapt and rights-filter one document for one request."""
        options = options or RenderOptions()
        if ref.is_local and not self.store.entity_exists(ref.id):
            raise UnknownEntity(f"no entity {ref.id}")
        root = self._expand(ref, frozenset(), 1, options)
        tree = RenderTree(root=root)
        tree = adaptation.adapt_render(tree, options.context)
        tree = access.filter_render(self.store, tree, options.user)
        return tree

    # ------------------------------------------------------------------

    def _expand(
        self, ref: EntityRef, path: frozenset, depth: int, options: RenderOptions
    ) -> RenderNode:
        key = ref.sort_key()
        if key in path:
            return RenderNode(kind=rtree.CYCLE, entity=ref)
        path = path | {key}
        if not ref.is_local:
            return self._expand_remote(ref, path, depth, options)
        try:
            entity = self.store.get_entity(ref.id)
        except UnknownEntity:
            # only reachable when an entity is deleted mid-render
            return self._unresolved(ref, "unknown_entity")
        if isinstance(entity, Resource):
            if entity.media_type == COMPOSITE:
                return self._expand_composite(ref, entity, path, depth, options)
            if entity.media_type == IMAGE:
                return RenderNode(
                    kind=rtree.TEXT_SPAN,
                    entity=ref,
                    text="",
                    annotations={"media_type": IMAGE, "fingerprint": entity.content or ""},
                )
            text = self.store.resource_text(entity)
            return self._expand_text(
                ref, entity.id, entity.content, text, 0, len(text),
                path, depth, options, stale=False,
            )
        if isinstance(entity, Selector):
            return self._expand_local_selector(ref, entity, path, depth, options)
        return RenderNode(
            kind=rtree.COMPOSITE, entity=ref, annotations={"entity_kind": "link"}
        )

    def _expand_composite(
        self,
        ref: EntityRef,
        entity: Resource,
        path: frozenset,
        depth: int,
        options: RenderOptions,
    ) -> RenderNode:
        children: list[RenderNode] = []
        for link in self.store.structural_links_from(entity.id):
            group = link.id if len(link.targets) > 1 else None
            for target in link.targets:
                child = self._expand(target, path, depth, options)
                if group is not None:
                    child = self._annotate_variant(child, group, target)
                children.append(child)
        return RenderNode(kind=rtree.COMPOSITE, entity=ref, children=tuple(children))

    def _annotate_variant(
        self, child: RenderNode, group: str, target: EntityRef
    ) -> RenderNode:
        ann = dict(child.annotations)
        ann[rtree.ANN_VARIANT_GROUP] = group
        ann.update(self._requirement_properties(target))
        return replace(child, annotations=ann)

    def _requirement_properties(self, target: EntityRef) -> dict[str, str]:
        if target.is_local:
            try:
                props = self.store.get_entity(target.id).properties
            except UnknownEntity:
                return {}
        elif self.federation is not None:
            try:
                props = self.federation.fetch_entity(target).get("properties", {})
            except FluidError:
                return {}
        else:
            return {}
        return {
            k: v for k, v in props.items() if k.startswith(CONTEXT_PROPERTY_PREFIX)
        }

    def _expand_local_selector(
        self,
        ref: EntityRef,
        sel: Selector,
        path: frozenset,
        depth: int,
        options: RenderOptions,
    ) -> RenderNode:
        res = self.store.get_resource(sel.resource)
        stale = res.content != sel.bound_fingerprint
        if options.mode == LIVE:
            text = self.store.resource_text(res)
            if sel.end > len(text):
                return RenderNode(kind=rtree.STALE, entity=ref, stale=True)
            return self._expand_text(
                ref, sel.resource, res.content, text, sel.start, sel.end,
                path, depth, options, stale=False,
            )
        text = self.store.resource_text(res, sel.bound_fingerprint)
        return self._expand_text(
            ref, sel.resource, sel.bound_fingerprint, text, sel.start, sel.end,
            path, depth, options, stale=stale,
        )

    def _expand_text(
        self,
        entity_ref: EntityRef,
        resource_id: str,
        fingerprint: str | None,
        full_text: str,
        start: int,
        end: int,
        path: frozenset,
        depth: int,
        options: RenderOptions,
        stale: bool,
    ) -> RenderNode:
        """Emit the span [start, end), split around transclusion anchors that
        are bound to the same content snapshot and lie entirely within it."""
        events: list[tuple[int, int, Selector, Link]] = []
        for anchor in self.store.selectors_of_resource(resource_id):
            if anchor.bound_fingerprint != fingerprint:
                continue
            if not (start <= anchor.start and anchor.end <= end):
                continue
            for link in self.store.transclusion_links_targeting(anchor.id):
                events.append((anchor.start, link.seq, anchor, link))
        span_kind = rtree.STALE if stale else rtree.TEXT_SPAN

        def piece(piece_start: int, piece_end: int) -> RenderNode:
            # offset/resource annotations let clients map a span selection
            # back to coordinates of the underlying resource content
            return RenderNode(
                kind=span_kind,
                entity=entity_ref,
                text=full_text[piece_start:piece_end],
                stale=stale,
                annotations={"resource": resource_id, "offset": str(piece_start)},
            )

        if not events:
            return piece(start, end)
        events.sort(key=lambda e: (e[0], e[1]))
        children: list[RenderNode] = []
        pos = start
        for anchor_start, _, anchor, link in events:
            cut = min(max(anchor_start, pos), end)
            if cut > pos:
                children.append(piece(pos, cut))
            children.append(self._transclusion_node(link, path, depth, options))
            pos = max(pos, min(anchor.end, end))
        if pos < end:
            children.append(piece(pos, end))
        return RenderNode(
            kind=rtree.COMPOSITE,
            entity=entity_ref,
            children=tuple(children),
            stale=stale,
            annotations={rtree.ANN_LAYOUT: rtree.LAYOUT_INLINE},
        )

    def _transclusion_node(
        self, link: Link, path: frozenset, depth: int, options: RenderOptions
    ) -> RenderNode:
        origin = link.sources[0]
        child_depth = depth + 1
        if child_depth > options.max_depth:
            inner = RenderNode(kind=rtree.DEPTH_LIMIT, entity=origin)
        else:
            inner = self._expand(origin, path, child_depth, options)
        return RenderNode(
            kind=rtree.TRANSCLUSION,
            entity=local_ref(link.id),
            origin=origin,
            children=(inner,),
        )

    # ------------------------------------------------------------------
    # remote expansion: entity records + verified blobs, never raw trust

    def _unresolved(self, ref: EntityRef, reason: str) -> RenderNode:
        return RenderNode(
            kind=rtree.UNRESOLVED_REMOTE, entity=ref, annotations={"reason": reason}
        )

    def _expand_remote(
        self, ref: EntityRef, path: frozenset, depth: int, options: RenderOptions
    ) -> RenderNode:
        if self.federation is None:
            return self._unresolved(ref, "federation_disabled")
        try:
            record = self.federation.fetch_entity(ref)
        except IntegrityMismatch:
            raise
        except FluidError as err:
            return self._unresolved(ref, err.code)
        try:
            if record.get("kind") == "resource":
                return self._expand_remote_resource(ref, record, path, depth, options)
            if record.get("kind") == "selector":
                return self._expand_remote_selector(ref, record, options)
        except IntegrityMismatch:
            raise
        except FluidError as err:
            return self._unresolved(ref, err.code)
        return RenderNode(
            kind=rtree.COMPOSITE, entity=ref, annotations={"entity_kind": "link"}
        )

    def _expand_remote_resource(
        self,
        ref: EntityRef,
        record: dict,
        path: frozenset,
        depth: int,
        options: RenderOptions,
    ) -> RenderNode:
        media = record.get("media_type")
        if media == COMPOSITE:
            link_records = [
                self.federation.fetch_entity(EntityRef(id=link_id, store=ref.store))
                for link_id in self.federation.fetch_entity_links(
                    ref, "outgoing", STRUCTURAL
                )
            ]
            link_records.sort(key=_remote_slot_order)
            children: list[RenderNode] = []
            for rec in link_records:
                targets = [
                    self.federation.qualify(ref.store, raw)
                    for raw in rec.get("targets", ())
                ]
                group = rec["id"] if len(targets) > 1 else None
                for target in targets:
                    child = self._expand(target, path, depth, options)
                    if group is not None:
                        child = self._annotate_variant(child, group, target)
                    children.append(child)
            return RenderNode(
                kind=rtree.COMPOSITE, entity=ref, children=tuple(children)
            )
        if media == IMAGE:
            return RenderNode(
                kind=rtree.TEXT_SPAN,
                entity=ref,
                text="",
                annotations={
                    "media_type": IMAGE,
                    "fingerprint": record.get("content") or "",
                },
            )
        data = self.federation.fetch_content(ref.store, record["content"])
        # transclusion anchors hosted on the peer are not discoverable over
        # the entity protocol; remote text renders as one unsplit span
        return RenderNode(kind=rtree.TEXT_SPAN, entity=ref, text=_decode(data))

    def _expand_remote_selector(
        self, ref: EntityRef, record: dict, options: RenderOptions
    ) -> RenderNode:
        bound_fp = record["bound_fingerprint"]
        start, end = record["start"], record["end"]
        resource_ref = self.federation.qualify(ref.store, {"id": record["resource"]})
        current_fp = self._remote_current_fingerprint(resource_ref, ref.store)
        if options.mode == LIVE:
            if current_fp is None:
                return self._unresolved(ref, "remote_not_found")
            text = _decode(self.federation.fetch_content(ref.store, current_fp))
            if end > len(text):
                return RenderNode(kind=rtree.STALE, entity=ref, stale=True)
            return RenderNode(kind=rtree.TEXT_SPAN, entity=ref, text=text[start:end])
        text = _decode(self.federation.fetch_content(ref.store, bound_fp))
        stale = current_fp is not None and current_fp != bound_fp
        return RenderNode(
            kind=rtree.STALE if stale else rtree.TEXT_SPAN,
            entity=ref,
            text=text[start:min(end, len(text))],
            stale=stale,
        )

    def _remote_current_fingerprint(
        self, resource_ref: EntityRef, serving_store: str
    ) -> str | None:
        try:
            if resource_ref.is_local:
                return self.store.get_resource(resource_ref.id).content
            return self.federation.fetch_entity(resource_ref).get("content")
        except IntegrityMismatch:
            raise
        except FluidError:
            return None


def _remote_slot_order(record: dict) -> tuple[int, int]:
    raw = record.get("properties", {}).get("order", "0")
    try:
        order = int(raw)
    except (TypeError, ValueError):
        order = 0
    return (order, record.get("seq", 0))


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FluidError(f"remote blob is not valid UTF-8: {exc}") from exc
