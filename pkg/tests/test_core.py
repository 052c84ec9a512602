"""Entity graph: creation contracts, link queries, integrity rules."""

import random

import pytest

from fluiddoc.blobs import fingerprint_of
from fluiddoc.errors import (
    BadCardinality,
    EmptyEndpoint,
    FingerprintForbiddenForComposite,
    NotATextResource,
    RangeOutOfBounds,
    ReferencedEntity,
    StructuralCycle,
    UnknownEntity,
    UnknownFingerprint,
)
from fluiddoc.model import EntityRef
from fluiddoc.store import DocumentStore

from conftest import make_text

HELLO_FP = "sha256:2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"


def ref(entity_id):
    return EntityRef(id=entity_id)


def test_create_composite(store):
    doc = store.create_resource("composite", name="Book")
    res = store.get_resource(doc)
    assert res.media_type == "composite"
    assert res.content is None
    assert res.name == "Book"


def test_create_text_resource_records_fingerprint(store):
    fp = store.blobs.put(b"hello")
    rid = store.create_resource("text", content=fp, name="p1")
    assert store.get_resource(rid).content == HELLO_FP


def test_create_text_with_unknown_fingerprint(store):
    with pytest.raises(UnknownFingerprint):
        store.create_resource("text", content=fingerprint_of(b"nope"), name="x")


def test_composite_refuses_content(store):
    fp = store.blobs.put(b"hello")
    with pytest.raises(FingerprintForbiddenForComposite):
        store.create_resource("composite", content=fp)


def test_entity_ids_are_canonical(store):
    rid = store.create_resource("composite")
    assert rid == rid.lower()
    assert len(rid.replace("-", "")) == 32


def test_selector_full_range(store):
    rid = make_text(store, "hello")
    sid = store.create_selector(rid, 0, 5)
    sel = store.get_selector(sid)
    assert (sel.start, sel.end) == (0, 5)
    assert sel.bound_fingerprint == store.get_resource(rid).content


def test_selector_out_of_bounds(store):
    rid = make_text(store, "hello")
    with pytest.raises(RangeOutOfBounds):
        store.create_selector(rid, 2, 9)


def test_selector_needs_text_resource(store):
    doc = store.create_resource("composite")
    with pytest.raises(NotATextResource):
        store.create_selector(doc, 0, 0)
    with pytest.raises(UnknownEntity):
        store.create_selector("no-such-id", 0, 0)


def test_selector_counts_unicode_scalars(store):
    rid = make_text(store, "héllo ☃")  # 7 scalars, more bytes
    sid = store.create_selector(rid, 0, 7)
    assert store.get_selector(sid).end == 7
    with pytest.raises(RangeOutOfBounds):
        store.create_selector(rid, 0, 8)


def test_link_requires_endpoints(store):
    a = store.create_resource("composite")
    with pytest.raises(EmptyEndpoint):
        store.create_link("navigational", [ref(a)], [])
    with pytest.raises(EmptyEndpoint):
        store.create_link("navigational", [], [ref(a)])


def test_link_unknown_endpoint(store):
    a = store.create_resource("composite")
    with pytest.raises(UnknownEntity):
        store.create_link("navigational", [ref(a)], [ref("missing")])


def test_structural_two_cycle_rejected(store):
    a = store.create_resource("composite")
    b = store.create_resource("composite")
    store.create_link("structural", [ref(a)], [ref(b)])
    with pytest.raises(StructuralCycle):
        store.create_link("structural", [ref(b)], [ref(a)])


def test_structural_self_loop_rejected(store):
    a = store.create_resource("composite")
    with pytest.raises(StructuralCycle):
        store.create_link("structural", [ref(a)], [ref(a)])


def test_multidirectional_link_visible_from_every_endpoint(store):
    entities = [store.create_resource("composite") for _ in range(5)]
    a, b, c, d, e = entities
    link = store.create_link(
        "navigational", [ref(a), ref(b)], [ref(c), ref(d), ref(e)]
    )
    assert link in store.links_of(c, "incoming")
    assert link in store.links_of(a, "outgoing")
    assert link in store.links_of(e, "any")


def test_fresh_entity_has_no_links(store):
    a = store.create_resource("composite")
    assert store.links_of(a, "any") == []


def test_links_of_directions(store):
    a, b = make_text(store, "a"), make_text(store, "b")
    link = store.create_link("navigational", [ref(a)], [ref(b)])
    assert store.links_of(b, "incoming") == [link]
    assert store.links_of(a, "outgoing") == [link]
    assert store.links_of(a, "incoming") == []


def test_links_to_links(store):
    a, b = make_text(store, "a"), make_text(store, "b")
    base = store.create_link("navigational", [ref(a)], [ref(b)])
    meta = store.create_link("navigational", [ref(base)], [ref(a)])
    assert meta in store.links_of(base, "outgoing")
    with pytest.raises(BadCardinality):
        store.create_link("structural", [ref(a)], [ref(base)])


def test_transclusion_cardinality(store):
    a = make_text(store, "origin text")
    host = make_text(store, "host text")
    anchor = store.create_selector(host, 4, 4)
    origin_sel = store.create_selector(a, 0, 6)
    store.create_link("transclusion", [ref(origin_sel)], [ref(anchor)])
    with pytest.raises(BadCardinality):
        store.create_link("transclusion", [ref(a), ref(origin_sel)], [ref(anchor)])
    with pytest.raises(BadCardinality):
        store.create_link("transclusion", [ref(a)], [ref(host)])  # anchor not a selector


def test_links_of_agrees_with_full_scan_oracle(store):
    rng = random.Random(42)
    entities = [store.create_resource("composite", name=f"e{i}") for i in range(50)]
    created = []
    while len(created) < 120:
        sources = rng.sample(entities + created, rng.randint(1, 3))
        targets = rng.sample(entities + created, rng.randint(1, 3))
        created.append(store.create_link("navigational", map(ref, sources), map(ref, targets)))

    # independent oracle: brute-force scan over all link records
    records = store.all_link_records()
    for entity in entities + created:
        expected_out = [
            r["id"] for r in records
            if any(s.get("id") == entity and "store" not in s for s in r["sources"])
        ]
        expected_in = [
            r["id"] for r in records
            if any(t.get("id") == entity and "store" not in t for t in r["targets"])
        ]
        assert store.links_of(entity, "outgoing") == expected_out
        assert store.links_of(entity, "incoming") == expected_in
        union = sorted(set(expected_out) | set(expected_in),
                       key=lambda i: created.index(i))
        assert store.links_of(entity, "any") == union


def test_structural_children_sorted_by_order(store):
    doc = store.create_resource("composite")
    b, c = make_text(store, "b"), make_text(store, "c")
    store.create_link("structural", [ref(doc)], [ref(c)], {"order": "2"})
    store.create_link("structural", [ref(doc)], [ref(b)], {"order": "1"})
    assert [r.id for r in store.structural_children(doc)] == [b, c]


def test_structural_children_tie_break_by_creation(store):
    doc = store.create_resource("composite")
    first, second = make_text(store, "1"), make_text(store, "2")
    store.create_link("structural", [ref(doc)], [ref(first)], {"order": "1"})
    store.create_link("structural", [ref(doc)], [ref(second)], {"order": "1"})
    assert [r.id for r in store.structural_children(doc)] == [first, second]


def test_leaf_has_no_children(store):
    rid = make_text(store, "leaf")
    assert store.structural_children(rid) == []


def test_update_content_keeps_selector_snapshot(store):
    rid = make_text(store, "hello")
    sid = store.create_selector(rid, 0, 5)
    new_fp = store.blobs.put(b"world")
    store.update_resource_content(rid, new_fp)
    sel = store.get_selector(sid)
    assert sel.bound_fingerprint == HELLO_FP
    assert store.get_resource(rid).content == new_fp


def test_update_to_same_fingerprint_is_noop(store):
    rid = make_text(store, "hello")
    sid = store.create_selector(rid, 0, 5)
    store.update_resource_content(rid, store.get_resource(rid).content)
    assert store.get_selector(sid).bound_fingerprint == store.get_resource(rid).content


def test_update_unknown_resource(store):
    fp = store.blobs.put(b"x")
    with pytest.raises(UnknownEntity):
        store.update_resource_content("missing", fp)


def test_delete_referenced_by_selector_refused(store):
    rid = make_text(store, "hello")
    sid = store.create_selector(rid, 0, 2)
    with pytest.raises(ReferencedEntity) as excinfo:
        store.delete_entity(rid)
    assert sid in excinfo.value.referencing


def test_delete_isolated_entity(store):
    rid = make_text(store, "alone")
    store.delete_entity(rid)
    with pytest.raises(UnknownEntity):
        store.get_entity(rid)


def test_delete_link_clears_queries(store):
    a, b = make_text(store, "a"), make_text(store, "b")
    link = store.create_link("navigational", [ref(a)], [ref(b)])
    store.delete_entity(link)
    assert store.links_of(a, "any") == []
    assert store.links_of(b, "any") == []


def test_delete_endpoint_of_live_link_refused(store):
    a, b = make_text(store, "a"), make_text(store, "b")
    link = store.create_link("navigational", [ref(a)], [ref(b)])
    with pytest.raises(ReferencedEntity) as excinfo:
        store.delete_entity(b)
    assert link in excinfo.value.referencing


def test_store_reloads_from_disk(tmp_path):
    store = DocumentStore(tmp_path / "s")
    rid = make_text(store, "persisted")
    sid = store.create_selector(rid, 0, 4)
    doc = store.create_resource("composite", name="doc")
    link = store.create_link("structural", [ref(doc)], [ref(rid)], {"order": "1"})
    gone = store.create_resource("composite", name="temp")
    store.delete_entity(gone)

    reloaded = DocumentStore(tmp_path / "s")
    assert reloaded.get_resource(rid).content == store.get_resource(rid).content
    assert reloaded.get_selector(sid).end == 4
    assert [r.id for r in reloaded.structural_children(doc)] == [rid]
    assert reloaded.links_of(rid, "incoming") == [link]
    with pytest.raises(UnknownEntity):
        reloaded.get_entity(gone)


def test_corrupt_table_reports_storage_failure(tmp_path):
    from fluiddoc.errors import StorageFailure

    store = DocumentStore(tmp_path / "s")
    make_text(store, "fine")
    table = tmp_path / "s" / "tables" / "resources.jsonl"
    table.write_text(table.read_text() + "{not json}\n")
    with pytest.raises(StorageFailure):
        DocumentStore(tmp_path / "s")


def test_random_operations_never_dangle(store):
    """Referential integrity: any op sequence leaves every local ref resolvable."""
    rng = random.Random(7)
    resources, selectors, links = [], [], []
    for _ in range(300):
        action = rng.random()
        try:
            if action < 0.35 or not resources:
                resources.append(make_text(store, f"text-{rng.random()}"))
            elif action < 0.55:
                selectors.append(store.create_selector(rng.choice(resources), 0, 1))
            elif action < 0.75:
                pool = resources + selectors + links
                links.append(
                    store.create_link(
                        "navigational",
                        [ref(rng.choice(pool))],
                        [ref(rng.choice(pool))],
                    )
                )
            else:
                pool = resources + selectors + links
                victim = rng.choice(pool)
                store.delete_entity(victim)
                for bucket in (resources, selectors, links):
                    if victim in bucket:
                        bucket.remove(victim)
        except ReferencedEntity:
            pass
        except StructuralCycle:
            pass

    for rec in store.all_link_records():
        for endpoint in rec["sources"] + rec["targets"]:
            if "store" not in endpoint:
                assert store.entity_exists(endpoint["id"])
    for rid in list(selectors):
        assert store.entity_exists(store.get_selector(rid).resource)


def test_bidirectional_consistency(store):
    """E in sources(L) iff L in links_of(E, outgoing); symmetric for targets."""
    rng = random.Random(11)
    entities = [store.create_resource("composite") for _ in range(12)]
    for _ in range(40):
        store.create_link(
            "navigational",
            [ref(e) for e in rng.sample(entities, rng.randint(1, 2))],
            [ref(e) for e in rng.sample(entities, rng.randint(1, 2))],
        )
    for entity in entities:
        for link_id in store.links_of(entity, "outgoing"):
            assert any(r.id == entity for r in store.get_link(link_id).sources)
        for link_id in store.links_of(entity, "incoming"):
            assert any(r.id == entity for r in store.get_link(link_id).targets)
    for link in [store.get_link(i) for e in entities for i in store.links_of(e, "any")]:
        for src in link.sources:
            assert link.id in store.links_of(src.id, "outgoing")
        for tgt in link.targets:
            assert link.id in store.links_of(tgt.id, "incoming")
