"""Context-based output adaptation.

A link target declares requirements through entity properties prefixed
``ctx:`` (requirement key = suffix). A target is eligible for a request
context iff every requirement appears in the context with an equal value.
Among eligible targets the most specific ones win (largest requirement
count); equally specific survivors are kept, ordered by entity id. The
empty context therefore selects exactly the zero-requirement defaults.

The same matching drives two surfaces: ``select_targets`` scores a link's
targets against the graph, and ``adapt_render`` prunes variant groups that
the renderer annotated into the tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import WrongLinkKind
from .model import CONTEXT_PROPERTY_PREFIX, NAVIGATIONAL, STRUCTURAL, EntityRef
from .store import DocumentStore
from . import tree as rtree
from .tree import RenderNode, RenderTree

Context = Mapping[str, str]


def build_context(
    user_properties: Mapping[str, str] | None,
    request_context: Mapping[str, str],
) -> dict[str, str]:
    """Stored user preferences enter as ``user.<key>``; request entries win."""
    merged: dict[str, str] = {}
    if user_properties:
        for key, value in user_properties.items():
            merged[f"user.{key}"] = value
    merged.update(request_context)
    return merged


@dataclass(frozen=True)
class VariantScore:
    target: EntityRef
    matched: int
    required: int

    @property
    def eligible(self) -> bool:
        return self.matched == self.required


def requirements_of(properties: Mapping[str, str]) -> dict[str, str]:
    prefix = CONTEXT_PROPERTY_PREFIX
    return {
        key[len(prefix):]: value
        for key, value in properties.items()
        if key.startswith(prefix) and len(key) > len(prefix)
    }


def score_target(
    target: EntityRef, requirements: Mapping[str, str], context: Context
) -> VariantScore:
    matched = sum(1 for k, v in requirements.items() if context.get(k) == v)
    return VariantScore(target=target, matched=matched, required=len(requirements))


def pick_winners(scores: list[VariantScore]) -> list[VariantScore]:
    eligible = [s for s in scores if s.eligible]
    if eligible:
        best = max(s.required for s in eligible)
        chosen = [s for s in eligible if s.required == best]
    else:
        chosen = [s for s in scores if s.required == 0]
    return sorted(chosen, key=lambda s: s.target.sort_key())


def select_targets(
    store: DocumentStore,
    link_id: str,
    context: Context,
    federation=None,
) -> list[EntityRef]:
    """Targets of a navigational or structural link that survive the context."""
    link = store.get_link(link_id)
    if link.kind not in (NAVIGATIONAL, STRUCTURAL):
        raise WrongLinkKind(f"{link.kind} links are not adapted")
    scores = []
    for target in link.targets:
        scores.append(score_target(target, _target_requirements(store, target, federation), context))
    return [s.target for s in pick_winners(scores)]


def _target_requirements(
    store: DocumentStore, target: EntityRef, federation
) -> dict[str, str]:
    if target.is_local:
        return requirements_of(store.get_entity(target.id).properties)
    if federation is None:
        return {}
    try:
        record = federation.fetch_entity(target)
    except Exception:
        return {}  # unreachable peers degrade to default variants
    return requirements_of(record.get("properties", {}))


def adapt_render(tree: RenderTree, context: Context) -> RenderTree:
    """Prune variant groups in a rendered tree down to the context's winners."""
    return RenderTree(root=_adapt_node(tree.root, context))


def _adapt_node(node: RenderNode, context: Context) -> RenderNode:
    children = tuple(_adapt_node(c, context) for c in node.children)
    if any(rtree.ANN_VARIANT_GROUP in c.annotations for c in children):
        children = _prune_variants(children, context)
    return node.with_children(children)


def _prune_variants(
    children: tuple[RenderNode, ...], context: Context
) -> tuple[RenderNode, ...]:
    groups: dict[str, list[RenderNode]] = {}
    for child in children:
        group = child.annotations.get(rtree.ANN_VARIANT_GROUP)
        if group is not None:
            groups.setdefault(group, []).append(child)
    survivors: dict[str, list[RenderNode]] = {}
    for group, members in groups.items():
        scored = [
            (m, score_target(m.entity, requirements_of(m.annotations), context))
            for m in members
        ]
        winning = {id(s) for s in pick_winners([s for _, s in scored])}
        kept = [m for m, s in scored if id(s) in winning]
        kept.sort(key=lambda m: m.entity.sort_key())
        survivors[group] = kept
    out: list[RenderNode] = []
    emitted: set[str] = set()
    for child in children:
        group = child.annotations.get(rtree.ANN_VARIANT_GROUP)
        if group is None:
            out.append(child)
        elif group not in emitted:
            emitted.add(group)
            out.extend(survivors[group])
    return tuple(out)
