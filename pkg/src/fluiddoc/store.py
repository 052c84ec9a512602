"""Entity graph store: resources, selectors, links, users and rights.

One store instance owns a directory containing the blob store plus one
append-only JSONL table per record kind. Mutations are serialized through
a single writer lock and appended to the table logs; reads are lock-free
over immutable snapshots, so renders can proceed concurrently.

Structural links compose documents: one source (the parent) and one or
more targets (the children; several targets on one link form a variant
group sharing one ordered slot). The structural graph over local entities
is kept acyclic by checking reachability before every insertion.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

from .blobs import BlobStore
from .errors import (
    BadCardinality,
    EmptyEndpoint,
    FingerprintForbiddenForComposite,
    InvalidUtf8,
    NameTaken,
    NotATextResource,
    NotOwner,
    RangeOutOfBounds,
    ReferencedEntity,
    StorageFailure,
    StructuralCycle,
    UnknownEntity,
    UnknownFingerprint,
)
from .model import (
    COMPOSITE,
    LINK_KINDS,
    MEDIA_TYPES,
    STRUCTURAL,
    TEXT,
    TRANSCLUSION,
    EntityRef,
    Link,
    Resource,
    RightsSpec,
    Selector,
    User,
    new_entity_id,
    new_token,
    validate_properties,
)

_TABLES = ("resources", "selectors", "links", "users", "rights")


def resource_record(res: Resource) -> dict:
    return {
        "kind": "resource",
        "id": res.id,
        "media_type": res.media_type,
        "name": res.name,
        "content": res.content,
        "properties": dict(res.properties),
        "seq": res.seq,
    }


def selector_record(sel: Selector) -> dict:
    return {
        "kind": "selector",
        "id": sel.id,
        "resource": sel.resource,
        "bound_fingerprint": sel.bound_fingerprint,
        "start": sel.start,
        "end": sel.end,
        "properties": dict(sel.properties),
        "seq": sel.seq,
    }


def link_record(link: Link) -> dict:
    return {
        "kind": "link",
        "id": link.id,
        "link_kind": link.kind,
        "sources": [ref.to_wire() for ref in link.sources],
        "targets": [ref.to_wire() for ref in link.targets],
        "properties": dict(link.properties),
        "seq": link.seq,
    }


def entity_record(entity: Resource | Selector | Link) -> dict:
    if isinstance(entity, Resource):
        return resource_record(entity)
    if isinstance(entity, Selector):
        return selector_record(entity)
    return link_record(entity)


def _resource_from_record(rec: Mapping) -> Resource:
    return Resource(
        id=rec["id"],
        media_type=rec["media_type"],
        name=rec.get("name", ""),
        content=rec.get("content"),
        properties=rec.get("properties", {}),
        seq=rec.get("seq", 0),
    )


def _selector_from_record(rec: Mapping) -> Selector:
    return Selector(
        id=rec["id"],
        resource=rec["resource"],
        bound_fingerprint=rec["bound_fingerprint"],
        start=rec["start"],
        end=rec["end"],
        properties=rec.get("properties", {}),
        seq=rec.get("seq", 0),
    )


def _link_from_record(rec: Mapping) -> Link:
    return Link(
        id=rec["id"],
        kind=rec["link_kind"],
        sources=tuple(EntityRef.from_wire(r) for r in rec["sources"]),
        targets=tuple(EntityRef.from_wire(r) for r in rec["targets"]),
        properties=rec.get("properties", {}),
        seq=rec.get("seq", 0),
    )


class DocumentStore:
    """Persistent entity graph plus the blob store it names content in."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.blobs = BlobStore(self.root / "blobs")
        self._tables = self.root / "tables"
        self._tables.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.RLock()

        self._resources: dict[str, Resource] = {}
        self._selectors: dict[str, Selector] = {}
        self._links: dict[str, Link] = {}
        self._users: dict[str, User] = {}
        self._users_by_name: dict[str, User] = {}
        self._users_by_token: dict[str, User] = {}
        self._rights: dict[str, RightsSpec] = {}

        self._used_ids: set[str] = set()
        self._seq = 0
        # adjacency indexes; links_of must not degrade to a full scan
        self._outgoing: dict[str, list[str]] = defaultdict(list)
        self._incoming: dict[str, list[str]] = defaultdict(list)
        self._structural_out: dict[str, list[str]] = defaultdict(list)
        self._selectors_by_resource: dict[str, list[str]] = defaultdict(list)

        self._load()

    # ------------------------------------------------------------------
    # persistence

    def _table_path(self, table: str) -> Path:
        return self._tables / f"{table}.jsonl"

    def _append(self, table: str, entry: dict) -> None:
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._table_path(table).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()

    def _load(self) -> None:
        for table in _TABLES:
            path = self._table_path(table)
            if not path.is_file():
                continue
            with path.open("r", encoding="utf-8") as fh:
                for number, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise StorageFailure(
                            f"corrupt store: {path.name} line {number}: {exc}"
                        ) from exc
                    self._replay(table, entry)

    def _replay(self, table: str, entry: dict) -> None:
        op = entry.get("op", "put")
        if table == "rights":
            if op == "delete":
                self._rights.pop(entry["entity"], None)
            else:
                rec = entry["record"]
                self._rights[rec["entity"]] = RightsSpec(
                    entity=rec["entity"],
                    owner=rec["owner"],
                    readers=frozenset(rec.get("readers", [])),
                    editors=frozenset(rec.get("editors", [])),
                )
            return
        if table == "users":
            rec = entry["record"]
            user = User(
                id=rec["id"],
                name=rec["name"],
                token=rec["token"],
                properties=rec.get("properties", {}),
            )
            self._index_user(user)
            return
        if op == "delete":
            self._drop_entity(entry["id"])
            self._used_ids.add(entry["id"])
            return
        rec = entry["record"]
        self._seq = max(self._seq, rec.get("seq", 0))
        if table == "resources":
            self._index_resource(_resource_from_record(rec))
        elif table == "selectors":
            self._index_selector(_selector_from_record(rec))
        elif table == "links":
            self._index_link(_link_from_record(rec))

    # ------------------------------------------------------------------
    # index maintenance

    def _index_user(self, user: User) -> None:
        self._users[user.id] = user
        self._users_by_name[user.name] = user
        self._users_by_token[user.token] = user

    def _index_resource(self, res: Resource) -> None:
        self._resources[res.id] = res
        self._used_ids.add(res.id)

    def _index_selector(self, sel: Selector) -> None:
        previous = self._selectors.get(sel.id)
        self._selectors[sel.id] = sel
        self._used_ids.add(sel.id)
        if previous is None:
            self._selectors_by_resource[sel.resource].append(sel.id)

    def _index_link(self, link: Link) -> None:
        self._links[link.id] = link
        self._used_ids.add(link.id)
        for ref in _unique_local_ids(link.sources):
            self._outgoing[ref].append(link.id)
        for ref in _unique_local_ids(link.targets):
            self._incoming[ref].append(link.id)
        if link.kind == STRUCTURAL:
            parent = link.sources[0]
            if parent.is_local:
                self._structural_out[parent.id].append(link.id)

    def _drop_entity(self, entity_id: str) -> None:
        if entity_id in self._resources:
            del self._resources[entity_id]
        elif entity_id in self._selectors:
            sel = self._selectors.pop(entity_id)
            self._selectors_by_resource[sel.resource].remove(entity_id)
        elif entity_id in self._links:
            link = self._links.pop(entity_id)
            for ref in _unique_local_ids(link.sources):
                self._outgoing[ref].remove(link.id)
            for ref in _unique_local_ids(link.targets):
                self._incoming[ref].remove(link.id)
            if link.kind == STRUCTURAL:
                parent = link.sources[0]
                if parent.is_local:
                    self._structural_out[parent.id].remove(link.id)
        self._rights.pop(entity_id, None)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _fresh_id(self) -> str:
        while True:
            candidate = new_entity_id()
            if candidate not in self._used_ids:
                self._used_ids.add(candidate)
                return candidate

    # ------------------------------------------------------------------
    # lookups

    def entity_exists(self, entity_id: str) -> bool:
        return (
            entity_id in self._resources
            or entity_id in self._selectors
            or entity_id in self._links
        )

    def get_entity(self, entity_id: str) -> Resource | Selector | Link:
        entity = (
            self._resources.get(entity_id)
            or self._selectors.get(entity_id)
            or self._links.get(entity_id)
        )
        if entity is None:
            raise UnknownEntity(f"no entity {entity_id}")
        return entity

    def get_resource(self, entity_id: str) -> Resource:
        res = self._resources.get(entity_id)
        if res is None:
            raise UnknownEntity(f"no resource {entity_id}")
        return res

    def get_selector(self, entity_id: str) -> Selector:
        sel = self._selectors.get(entity_id)
        if sel is None:
            raise UnknownEntity(f"no selector {entity_id}")
        return sel

    def get_link(self, entity_id: str) -> Link:
        link = self._links.get(entity_id)
        if link is None:
            raise UnknownEntity(f"no link {entity_id}")
        return link

    def resource_text(self, res: Resource, fingerprint: str | None = None) -> str:
        """Decode the resource's blob (or an explicit snapshot) as UTF-8."""
        fp = fingerprint or res.content
        if fp is None:
            raise NotATextResource(f"{res.id} has no content blob")
        data = self.blobs.get(fp)
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidUtf8(f"blob {fp} is not valid UTF-8") from exc

    # ------------------------------------------------------------------
    # entity creation

    def create_resource(
        self,
        media_type: str,
        content: str | None = None,
        name: str = "",
        properties: Mapping[str, str] | None = None,
    ) -> str:
        if media_type not in MEDIA_TYPES:
            raise BadCardinality(f"unknown media type {media_type!r}")
        if media_type == COMPOSITE:
            if content is not None:
                raise FingerprintForbiddenForComposite(
                    "composite resources take content from structural children"
                )
        else:
            if content is None or not self.blobs.has(content):
                raise UnknownFingerprint(f"content {content!r} not in store")
            if media_type == TEXT:
                # reject undecodable text up front instead of at render time
                try:
                    self.blobs.get(content).decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise InvalidUtf8(f"blob {content} is not valid UTF-8") from exc
        props = validate_properties(properties or {})
        with self._write_lock:
            res = Resource(
                id=self._fresh_id(),
                media_type=media_type,
                name=name,
                content=content,
                properties=props,
                seq=self._next_seq(),
            )
            self._index_resource(res)
            self._append("resources", {"op": "put", "record": resource_record(res)})
            return res.id

    def create_selector(
        self,
        resource: str,
        start: int,
        end: int,
        properties: Mapping[str, str] | None = None,
    ) -> str:
        res = self._resources.get(resource)
        if res is None:
            if self.entity_exists(resource):
                raise NotATextResource(f"{resource} is not a resource")
            raise UnknownEntity(f"no resource {resource}")
        if res.media_type != TEXT:
            raise NotATextResource(f"{resource} is {res.media_type}, not text")
        text = self.resource_text(res)
        if not (0 <= start <= end <= len(text)):
            raise RangeOutOfBounds(
                f"range ({start}, {end}) outside content of length {len(text)}"
            )
        props = validate_properties(properties or {})
        with self._write_lock:
            sel = Selector(
                id=self._fresh_id(),
                resource=resource,
                bound_fingerprint=res.content,
                start=start,
                end=end,
                properties=props,
                seq=self._next_seq(),
            )
            self._index_selector(sel)
            self._append("selectors", {"op": "put", "record": selector_record(sel)})
            return sel.id

    def create_link(
        self,
        kind: str,
        sources: Iterable[EntityRef],
        targets: Iterable[EntityRef],
        properties: Mapping[str, str] | None = None,
    ) -> str:
        if kind not in LINK_KINDS:
            raise BadCardinality(f"unknown link kind {kind!r}")
        sources = tuple(sources)
        targets = tuple(targets)
        if not sources or not targets:
            raise EmptyEndpoint("links need non-empty sources and targets")
        for ref in sources + targets:
            if ref.is_local and not self.entity_exists(ref.id):
                raise UnknownEntity(f"no entity {ref.id}")
        if kind == STRUCTURAL:
            self._check_structural(sources, targets)
        elif kind == TRANSCLUSION:
            self._check_transclusion(sources, targets)
        props = validate_properties(properties or {})
        with self._write_lock:
            link = Link(
                id=self._fresh_id(),
                kind=kind,
                sources=sources,
                targets=targets,
                properties=props,
                seq=self._next_seq(),
            )
            self._index_link(link)
            self._append("links", {"op": "put", "record": link_record(link)})
            return link.id

    def _check_structural(
        self, sources: tuple[EntityRef, ...], targets: tuple[EntityRef, ...]
    ) -> None:
        # one parent; several targets form a variant group for one slot
        if len(sources) != 1:
            raise BadCardinality("structural links take exactly one source")
        for ref in sources + targets:
            if ref.is_local and ref.id in self._links:
                raise BadCardinality("links cannot be structural endpoints")
        parent = sources[0]
        if not parent.is_local:
            return
        for child in targets:
            if child.is_local and self._structural_reaches(child.id, parent.id):
                raise StructuralCycle(
                    f"link {parent.id} -> {child.id} would close a cycle"
                )
            if child.is_local and child.id == parent.id:
                raise StructuralCycle(f"{parent.id} cannot contain itself")

    def _structural_reaches(self, start: str, goal: str) -> bool:
        """DFS over local structural edges: is ``goal`` reachable from ``start``?"""
        stack = [start]
        seen: set[str] = set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            for link_id in self._structural_out.get(node, ()):
                for child in self._links[link_id].targets:
                    if child.is_local:
                        stack.append(child.id)
        return False

    def _check_transclusion(
        self, sources: tuple[EntityRef, ...], targets: tuple[EntityRef, ...]
    ) -> None:
        if len(sources) != 1 or len(targets) != 1:
            raise BadCardinality(
                "transclusion links take exactly one origin and one anchor"
            )
        origin, anchor = sources[0], targets[0]
        if origin.is_local and origin.id in self._links:
            raise BadCardinality("transclusion origin must be a selector or resource")
        if anchor.is_local and anchor.id not in self._selectors:
            raise BadCardinality("transclusion anchor must be a selector")

    # ------------------------------------------------------------------
    # graph queries

    def links_of(
        self,
        entity_id: str,
        direction: str = "any",
        kind: str | None = None,
    ) -> list[str]:
        """Link ids touching ``entity_id``, in link creation order."""
        if not self.entity_exists(entity_id):
            raise UnknownEntity(f"no entity {entity_id}")
        if direction not in ("incoming", "outgoing", "any"):
            raise ValueError(f"bad direction {direction!r}")
        outgoing = self._outgoing.get(entity_id, [])
        incoming = self._incoming.get(entity_id, [])
        if direction == "outgoing":
            ids = list(outgoing)
        elif direction == "incoming":
            ids = list(incoming)
        else:
            ids = sorted(set(outgoing) | set(incoming), key=lambda i: self._links[i].seq)
        if kind is not None:
            ids = [i for i in ids if self._links[i].kind == kind]
        return ids

    def structural_children(self, parent_id: str) -> list[EntityRef]:
        """Children in slot order: ascending link ``order`` property, ties by
        link creation sequence, then target position within the link."""
        if not self.entity_exists(parent_id):
            raise UnknownEntity(f"no entity {parent_id}")
        out: list[EntityRef] = []
        for link in self.structural_links_from(parent_id):
            out.extend(link.targets)
        return out

    def structural_links_from(self, parent_id: str) -> list[Link]:
        links = [self._links[i] for i in self._structural_out.get(parent_id, ())]
        links.sort(key=lambda l: (l.order_value(), l.seq))
        return links

    def structural_parents(self, entity_id: str) -> list[str]:
        """Local parents: sources of structural links having the entity as target."""
        parents = []
        for link_id in self._incoming.get(entity_id, ()):
            link = self._links[link_id]
            if link.kind == STRUCTURAL and link.sources[0].is_local:
                parents.append(link.sources[0].id)
        return parents

    def selectors_of_resource(self, resource_id: str) -> list[Selector]:
        return [
            self._selectors[i]
            for i in self._selectors_by_resource.get(resource_id, ())
        ]

    def transclusion_links_targeting(self, selector_id: str) -> list[Link]:
        links = []
        for link_id in self._incoming.get(selector_id, ()):
            link = self._links[link_id]
            if link.kind == TRANSCLUSION:
                links.append(link)
        return links

    def all_link_records(self) -> list[dict]:
        return [link_record(l) for l in sorted(self._links.values(), key=lambda l: l.seq)]

    def media_type_for_content(self, fingerprint: str) -> str | None:
        """Media type of a resource citing this blob, if any (serving hint)."""
        for res in self._resources.values():
            if res.content == fingerprint:
                return res.media_type
        return None

    # ------------------------------------------------------------------
    # mutation of existing entities

    def update_resource_content(self, resource_id: str, new_content: str) -> None:
        res = self._resources.get(resource_id)
        if res is None:
            raise UnknownEntity(f"no resource {resource_id}")
        if res.media_type != TEXT:
            raise NotATextResource(f"{resource_id} is {res.media_type}, not text")
        if not self.blobs.has(new_content):
            raise UnknownFingerprint(f"content {new_content!r} not in store")
        if res.content == new_content:
            return
        with self._write_lock:
            res = self._resources[resource_id]
            updated = Resource(
                id=res.id,
                media_type=res.media_type,
                name=res.name,
                content=new_content,
                properties=dict(res.properties),
                seq=res.seq,
            )
            self._index_resource(updated)
            self._append("resources", {"op": "put", "record": resource_record(updated)})

    def delete_entity(self, entity_id: str) -> None:
        with self._write_lock:
            if not self.entity_exists(entity_id):
                raise UnknownEntity(f"no entity {entity_id}")
            holders: list[str] = []
            if entity_id in self._resources:
                holders.extend(self._selectors_by_resource.get(entity_id, ()))
            holders.extend(self._outgoing.get(entity_id, ()))
            holders.extend(self._incoming.get(entity_id, ()))
            if holders:
                raise ReferencedEntity(
                    "still referenced by: " + ", ".join(sorted(set(holders))),
                    referencing=tuple(sorted(set(holders))),
                )
            if entity_id in self._resources:
                table = "resources"
            elif entity_id in self._selectors:
                table = "selectors"
            else:
                table = "links"
            had_rights = entity_id in self._rights
            self._drop_entity(entity_id)
            self._append(table, {"op": "delete", "id": entity_id})
            if had_rights:
                self._append("rights", {"op": "delete", "entity": entity_id})

    # ------------------------------------------------------------------
    # users and rights

    def add_user(self, name: str, properties: Mapping[str, str] | None = None) -> User:
        if not name:
            raise NameTaken("user name must be non-empty")
        with self._write_lock:
            if name in self._users_by_name:
                raise NameTaken(f"user name {name!r} already exists")
            user = User(
                id=new_entity_id(),
                name=name,
                token=new_token(),
                properties=validate_properties(properties or {}),
            )
            self._index_user(user)
            self._append(
                "users",
                {
                    "op": "put",
                    "record": {
                        "id": user.id,
                        "name": user.name,
                        "token": user.token,
                        "properties": dict(user.properties),
                    },
                },
            )
            return user

    def user_by_token(self, token: str) -> User | None:
        return self._users_by_token.get(token)

    def user_by_id(self, user_id: str) -> User | None:
        return self._users.get(user_id)

    def user_by_name(self, name: str) -> User | None:
        return self._users_by_name.get(name)

    def user_count(self) -> int:
        return len(self._users)

    def set_rights(
        self,
        entity_id: str,
        owner: str,
        readers: Iterable[str],
        editors: Iterable[str],
        acting_user: str | None,
    ) -> None:
        """First writer becomes owner; afterwards only the owner may replace
        the rights record (and may transfer ownership by naming a new owner)."""
        if not self.entity_exists(entity_id):
            raise UnknownEntity(f"no entity {entity_id}")
        with self._write_lock:
            current = self._rights.get(entity_id)
            if current is None:
                if acting_user is None or owner != acting_user:
                    raise NotOwner("first rights writer must be the declared owner")
            elif acting_user != current.owner:
                raise NotOwner(f"only {current.owner} may change these rights")
            spec = RightsSpec(
                entity=entity_id,
                owner=owner,
                readers=frozenset(readers),
                editors=frozenset(editors),
            )
            self._rights[entity_id] = spec
            self._append(
                "rights",
                {
                    "op": "put",
                    "record": {
                        "entity": entity_id,
                        "owner": spec.owner,
                        "readers": sorted(spec.readers),
                        "editors": sorted(spec.editors),
                    },
                },
            )

    def rights_for(self, entity_id: str) -> RightsSpec | None:
        return self._rights.get(entity_id)


def _unique_local_ids(refs: tuple[EntityRef, ...]) -> list[str]:
    seen: list[str] = []
    for ref in refs:
        if ref.is_local and ref.id not in seen:
            seen.append(ref.id)
    return seen
