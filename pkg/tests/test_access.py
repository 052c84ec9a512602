"""Rights specs, inheritance along structure, and render redaction."""

import random

import pytest

from fluiddoc.access import can_read, filter_render
from fluiddoc.errors import AmbiguousParent, NotOwner, UnknownEntity
from fluiddoc.model import PUBLIC, EntityRef
from fluiddoc.render import RenderOptions, Renderer
from fluiddoc.tree import REDACTED, flatten

from conftest import make_document, make_text, transclude_at


def ref(entity_id):
    return EntityRef(id=entity_id)


@pytest.fixture
def users(store):
    return store.add_user("u1"), store.add_user("u2"), store.add_user("u3")


def render_for(store, entity_id, user_id):
    return Renderer(store).render(ref(entity_id), RenderOptions(user=user_id))


def test_first_writer_becomes_owner(store, users):
    u1, u2, _ = users
    rid = make_text(store, "text")
    store.set_rights(rid, owner=u1.id, readers=[], editors=[], acting_user=u1.id)
    assert store.rights_for(rid).owner == u1.id


def test_non_owner_cannot_overwrite(store, users):
    u1, u2, _ = users
    rid = make_text(store, "text")
    store.set_rights(rid, owner=u1.id, readers=[], editors=[], acting_user=u1.id)
    with pytest.raises(NotOwner):
        store.set_rights(rid, owner=u2.id, readers=[], editors=[], acting_user=u2.id)


def test_first_writer_must_name_self(store, users):
    u1, u2, _ = users
    rid = make_text(store, "text")
    with pytest.raises(NotOwner):
        store.set_rights(rid, owner=u2.id, readers=[], editors=[], acting_user=u1.id)


def test_public_readers_open_to_everyone(store, users):
    u1, u2, _ = users
    rid = make_text(store, "text")
    store.set_rights(rid, owner=u1.id, readers=[PUBLIC], editors=[], acting_user=u1.id)
    assert can_read(store, u2.id, rid)
    assert can_read(store, None, rid)


def test_owner_always_reads(store, users):
    u1, u2, _ = users
    rid = make_text(store, "text")
    store.set_rights(rid, owner=u1.id, readers=[u2.id], editors=[], acting_user=u1.id)
    assert can_read(store, u1.id, rid)


def test_inheritance_from_structural_parent(store, users):
    u1, u2, _ = users
    child = make_text(store, "child")
    doc = make_document(store, "doc", [child])
    store.set_rights(doc, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    assert can_read(store, u1.id, child)
    assert not can_read(store, u2.id, child)
    assert not can_read(store, None, child)


def test_default_public_when_no_spec_anywhere(store):
    child = make_text(store, "child")
    make_document(store, "doc", [child])
    assert can_read(store, None, child)


def test_nearest_spec_wins(store, users):
    u1, u2, _ = users
    child = make_text(store, "child")
    doc = make_document(store, "doc", [child])
    store.set_rights(doc, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    store.set_rights(child, owner=u2.id, readers=[u2.id], editors=[], acting_user=u2.id)
    assert can_read(store, u2.id, child)
    assert not can_read(store, u1.id, child)


def test_selector_inherits_resource_rights(store, users):
    u1, u2, _ = users
    rid = make_text(store, "secret text")
    sel = store.create_selector(rid, 0, 6)
    store.set_rights(rid, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    assert can_read(store, u1.id, sel)
    assert not can_read(store, u2.id, sel)


def test_ambiguous_equal_depth_parents(store, users):
    u1, u2, _ = users
    child = make_text(store, "shared")
    doc_a = make_document(store, "a", [child])
    doc_b = make_document(store, "b", [child])
    store.set_rights(doc_a, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    store.set_rights(doc_b, owner=u2.id, readers=[u2.id], editors=[], acting_user=u2.id)
    with pytest.raises(AmbiguousParent):
        can_read(store, u1.id, child)


def test_agreeing_parents_not_ambiguous(store, users):
    u1, u2, _ = users
    child = make_text(store, "shared")
    doc_a = make_document(store, "a", [child])
    doc_b = make_document(store, "b", [child])
    store.set_rights(doc_a, owner=u1.id, readers=[u2.id], editors=[], acting_user=u1.id)
    store.set_rights(doc_b, owner=u2.id, readers=[u2.id], editors=[], acting_user=u2.id)
    assert can_read(store, u2.id, child)


def test_unknown_entity(store):
    with pytest.raises(UnknownEntity):
        can_read(store, None, "missing")


# ----------------------------------------------------------------------
# filter_render


def test_public_tree_unchanged(store, users):
    doc = make_document(store, "d", [make_text(store, "p1"), make_text(store, "p2")])
    tree = Renderer(store).render(ref(doc), RenderOptions())
    filtered = filter_render(store, tree, None)
    assert flatten(filtered) == "p1p2"

    def all_accessible(node):
        return node.accessible and all(all_accessible(c) for c in node.children)

    assert all_accessible(filtered.root)


def test_middle_paragraph_redacted(store, users):
    u1, u2, _ = users
    parts = [make_text(store, t) for t in ("p1", "p2", "p3")]
    doc = make_document(store, "d", parts)
    store.set_rights(parts[1], owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    assert flatten(render_for(store, doc, u2.id)) == "p1[redacted]p3"
    assert flatten(render_for(store, doc, None)) == "p1[redacted]p3"
    assert flatten(render_for(store, doc, u1.id)) == "p1p2p3"


def test_redacted_node_keeps_entity_id(store, users):
    u1, u2, _ = users
    secret = make_text(store, "secret")
    doc = make_document(store, "d", [secret])
    store.set_rights(secret, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    tree = render_for(store, doc, u2.id)
    node = tree.root.children[0]
    assert node.kind == REDACTED
    assert node.entity.id == secret
    assert node.text is None and node.children == ()


def test_protected_origin_redacts_transclusion(store, users):
    u1, u2, _ = users
    origin = make_text(store, "classified")
    sel = store.create_selector(origin, 0, 10)
    host = make_text(store, "<>")
    transclude_at(store, sel, host, 1)
    store.set_rights(origin, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    assert flatten(render_for(store, host, u2.id)) == "<[redacted]>"
    assert flatten(render_for(store, host, u1.id)) == "<classified>"


def test_monotonicity_of_readers(store, users):
    u1, u2, u3 = users
    rng = random.Random(5)
    parts = [make_text(store, f"s{i}|") for i in range(6)]
    doc = make_document(store, "d", parts)
    for part in parts[:4]:
        store.set_rights(part, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    before = flatten(render_for(store, doc, u2.id))
    for part in rng.sample(parts[:4], 2):
        store.set_rights(
            part, owner=u1.id, readers=[u1.id, u2.id], editors=[], acting_user=u1.id
        )
    after = flatten(render_for(store, doc, u2.id))
    assert after.count("[redacted]") <= before.count("[redacted]")
    for i in range(6):
        if f"s{i}|" in before:
            assert f"s{i}|" in after


def test_per_user_divergence(store, users):
    u1, u2, _ = users
    secret = make_text(store, "secret")
    open_part = make_text(store, "open")
    doc = make_document(store, "d", [open_part, secret])
    store.set_rights(secret, owner=u1.id, readers=[u1.id], editors=[], acting_user=u1.id)
    assert render_for(store, doc, u1.id) != render_for(store, doc, u2.id)
    # identical rights produce identical trees
    other = store.add_user("u4")
    assert render_for(store, doc, u2.id) == render_for(store, doc, other.id)
