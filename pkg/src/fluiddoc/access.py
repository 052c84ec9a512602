"""Read-rights resolution and render-tree redaction.

Rights attach to individual entities. An entity without its own spec
inherits from the nearest ancestor that has one: a selector's first
ancestor is the resource it addresses, and every entity ascends through
the parents of structural links. When two equally-near ancestors disagree
about a user, the decision is ambiguous and we fail loudly instead of
inventing a merge policy. With no spec anywhere the default is public
read.

Redaction replaces an unreadable node by a leaf that keeps the entity id
visible but carries zero characters of protected content. Transcluded
content is governed by the rights of its origin entity.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import AmbiguousParent, UnknownEntity
from .model import EntityRef, Selector
from .store import DocumentStore
from . import tree as rtree
from .tree import RenderNode, RenderTree


def can_read(store: DocumentStore, user_id: str | None, entity_id: str) -> bool:
    """Decide readability by the entity's own spec or the nearest ancestor's.

    Raises AmbiguousParent when distinct nearest ancestors at the same
    depth decide differently for this user.
    """
    if not store.entity_exists(entity_id):
        raise UnknownEntity(f"no entity {entity_id}")
    level = [entity_id]
    seen = {entity_id}
    while level:
        decisions = set()
        for node in level:
            spec = store.rights_for(node)
            if spec is not None:
                decisions.add(spec.allows_read(user_id))
        if decisions:
            if len(decisions) > 1:
                raise AmbiguousParent(
                    f"conflicting inherited rights for {entity_id}"
                )
            return decisions.pop()
        next_level = []
        for node in level:
            for parent in _ancestry_parents(store, node):
                if parent not in seen:
                    seen.add(parent)
                    next_level.append(parent)
        level = next_level
    return True  # no spec anywhere: public read


def can_edit(store: DocumentStore, user_id: str | None, entity_id: str) -> bool:
    if not store.entity_exists(entity_id):
        raise UnknownEntity(f"no entity {entity_id}")
    level = [entity_id]
    seen = {entity_id}
    while level:
        decisions = set()
        for node in level:
            spec = store.rights_for(node)
            if spec is not None:
                decisions.add(spec.allows_edit(user_id))
        if decisions:
            if len(decisions) > 1:
                raise AmbiguousParent(
                    f"conflicting inherited rights for {entity_id}"
                )
            return decisions.pop()
        next_level = []
        for node in level:
            for parent in _ancestry_parents(store, node):
                if parent not in seen:
                    seen.add(parent)
                    next_level.append(parent)
        level = next_level
    return user_id is not None  # default: any authenticated user may edit


def _ancestry_parents(store: DocumentStore, entity_id: str) -> list[str]:
    parents = store.structural_parents(entity_id)
    entity = store.get_entity(entity_id)
    if isinstance(entity, Selector) and store.entity_exists(entity.resource):
        parents = [entity.resource] + parents
    return parents


def filter_render(
    store: DocumentStore, tree: RenderTree, user_id: str | None
) -> RenderTree:
    """Set every node's ``accessible`` flag and redact unreadable nodes."""
    return RenderTree(root=_filter_node(store, tree.root, user_id))


def _filter_node(
    store: DocumentStore, node: RenderNode, user_id: str | None
) -> RenderNode:
    if not _node_readable(store, node, user_id):
        return RenderNode(
            kind=rtree.REDACTED,
            entity=node.entity,
            accessible=False,
            annotations=dict(node.annotations),
        )
    children = tuple(_filter_node(store, c, user_id) for c in node.children)
    return replace(node, accessible=True, children=children)


def _node_readable(
    store: DocumentStore, node: RenderNode, user_id: str | None
) -> bool:
    subject: EntityRef | None
    if node.kind == rtree.TRANSCLUSION and node.origin is not None:
        subject = node.origin
    else:
        subject = node.entity
    if subject is None or not subject.is_local:
        # remote rights are the remote store's business
        return True
    try:
        return can_read(store, user_id, subject.id)
    except AmbiguousParent:
        return False  # fail closed inside a filter that must not raise
    except UnknownEntity:
        return True  # entity vanished after render; nothing left to protect
