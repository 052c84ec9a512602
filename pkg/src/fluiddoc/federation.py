"""Pull-only federation: resolve entities and content hosted by peer stores.

Entity records and link listings are cached for a configurable TTL
(entity metadata can change); content blobs are verified against their
fingerprint before caching and then never expire (content-addressed bytes
cannot change). Concurrent fetches of the same key are coalesced through
per-key locks. Bytes that fail verification never enter the cache or a
render tree.
"""

from __future__ import annotations

import threading
import time

import requests

from .blobs import fingerprint_of
from .errors import (
    IntegrityMismatch,
    ProtocolError,
    RemoteNotFound,
    StoreUnreachable,
)
from .model import EntityRef

STORE_HEADER = "X-Fluid-Store"
DEFAULT_TTL_SECONDS = 30.0


def normalize_store_uri(uri: str) -> str:
    return uri.rstrip("/")


class FederationClient:
    def __init__(
        self,
        own_uri: str | None = None,
        ttl_seconds: float = DEFAULT_TTL_SECONDS,
        timeout: float = 5.0,
        session: requests.Session | None = None,
    ):
        self.own_uri = normalize_store_uri(own_uri) if own_uri else None
        self.ttl_seconds = ttl_seconds
        self.timeout = timeout
        self.session = session or requests.Session()
        self.requests_made = 0
        self._records: dict[tuple, tuple[float, object]] = {}
        self._blobs: dict[tuple[str, str], bytes] = {}
        self._key_locks: dict[tuple, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # ------------------------------------------------------------------
    # reference handling

    def normalize(self, ref: EntityRef) -> EntityRef:
        """Collapse refs that point at this very store back to local ids."""
        if ref.store is None:
            return ref
        store = normalize_store_uri(ref.store)
        if self.own_uri is not None and store == self.own_uri:
            return EntityRef(id=ref.id)
        return EntityRef(id=ref.id, store=store)

    def qualify(self, serving_store: str, raw) -> EntityRef:
        """Interpret a wire ref served by ``serving_store``: store-less refs
        are local to the peer that emitted them."""
        ref = EntityRef.from_wire(raw)
        if ref.store is None:
            ref = EntityRef(id=ref.id, store=serving_store)
        return self.normalize(ref)

    # ------------------------------------------------------------------
    # fetching

    def fetch_entity(self, ref: EntityRef) -> dict:
        ref = self.normalize(ref)
        if ref.store is None:
            raise ProtocolError(f"{ref.id} is local; nothing to fetch")
        key = ("entity", ref.store, ref.id)
        record = self._cached_fetch(
            key, lambda: self._get_json(f"{ref.store}/entities/{ref.id}")
        )
        if not isinstance(record, dict) or "kind" not in record:
            raise ProtocolError(f"malformed entity record from {ref.store}")
        return record

    def fetch_entity_links(
        self, ref: EntityRef, direction: str = "any", kind: str | None = None
    ) -> list[str]:
        ref = self.normalize(ref)
        if ref.store is None:
            raise ProtocolError(f"{ref.id} is local; nothing to fetch")
        url = f"{ref.store}/entities/{ref.id}/links?direction={direction}"
        if kind:
            url += f"&kind={kind}"
        key = ("links", ref.store, ref.id, direction, kind)
        payload = self._cached_fetch(key, lambda: self._get_json(url))
        if not isinstance(payload, dict) or not isinstance(payload.get("links"), list):
            raise ProtocolError(f"malformed link listing from {ref.store}")
        return [str(i) for i in payload["links"]]

    def fetch_content(self, store: str, fingerprint: str) -> bytes:
        """Blob bytes whose recomputed digest equals ``fingerprint``."""
        store = normalize_store_uri(store)
        key = (store, fingerprint)
        cached = self._blobs.get(key)
        if cached is not None:
            return cached
        with self._key_lock(("blob",) + key):
            cached = self._blobs.get(key)
            if cached is not None:
                return cached
            data = self._get_bytes(f"{store}/content/{fingerprint}")
            if fingerprint_of(data) != fingerprint:
                raise IntegrityMismatch(
                    f"{store} served tampered bytes for {fingerprint}"
                )
            self._blobs[key] = data
            return data

    # ------------------------------------------------------------------
    # plumbing

    def _cached_fetch(self, key: tuple, fetch):
        now = time.monotonic()
        hit = self._records.get(key)
        if hit is not None and hit[0] > now:
            return hit[1]
        with self._key_lock(key):
            hit = self._records.get(key)
            if hit is not None and hit[0] > time.monotonic():
                return hit[1]
            value = fetch()
            if self.ttl_seconds > 0:
                self._records[key] = (time.monotonic() + self.ttl_seconds, value)
            return value

    def _key_lock(self, key: tuple) -> threading.Lock:
        with self._registry_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[key] = lock
            return lock

    def _headers(self) -> dict[str, str]:
        return {STORE_HEADER: self.own_uri} if self.own_uri else {}

    def _request(self, url: str) -> requests.Response:
        self.requests_made += 1
        try:
            resp = self.session.get(url, timeout=self.timeout, headers=self._headers())
        except requests.RequestException as exc:
            raise StoreUnreachable(f"{url}: {exc}") from exc
        if resp.status_code == 404:
            raise RemoteNotFound(url)
        if resp.status_code != 200:
            raise ProtocolError(f"{url} answered {resp.status_code}")
        return resp

    def _get_json(self, url: str) -> object:
        resp = self._request(url)
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{url} returned invalid JSON") from exc

    def _get_bytes(self, url: str) -> bytes:
        return self._request(url).content
