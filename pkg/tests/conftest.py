from __future__ import annotations

import socket
import threading
import time

import pytest
import uvicorn

from fluiddoc.model import EntityRef, TEXT
from fluiddoc.render import Renderer
from fluiddoc.service import ServiceConfig, create_app
from fluiddoc.store import DocumentStore


@pytest.fixture
def store(tmp_path):
    return DocumentStore(tmp_path / "store")


@pytest.fixture
def renderer(store):
    return Renderer(store)


def make_text(store: DocumentStore, text: str, name: str = "") -> str:
    fp = store.blobs.put(text.encode("utf-8"))
    return store.create_resource(TEXT, content=fp, name=name)


def make_document(store: DocumentStore, name: str, children: list[str]) -> str:
    doc = store.create_resource("composite", name=name)
    for order, child in enumerate(children, start=1):
        store.create_link(
            "structural",
            [EntityRef(id=doc)],
            [EntityRef(id=child)],
            {"order": str(order)},
        )
    return doc


def transclude_at(store: DocumentStore, origin_id: str, host_resource: str, offset: int) -> str:
    """Anchor selector at ``offset`` plus the transclusion link; returns link id."""
    anchor = store.create_selector(host_resource, offset, offset)
    return store.create_link(
        "transclusion", [EntityRef(id=origin_id)], [EntityRef(id=anchor)]
    )


def free_port() -> int:
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


class LiveServer:
    """One service instance on a real socket, run in a daemon thread."""

    def __init__(self, store_path, ttl_seconds: float = 30.0):
        self.port = free_port()
        self.base_url = f"http://127.0.0.1:{self.port}"
        self.config = ServiceConfig(
            store_path=str(store_path),
            bind_address=f"127.0.0.1:{self.port}",
            advertised_uri=self.base_url,
            federation_ttl_seconds=ttl_seconds,
        )
        self.store = DocumentStore(store_path)
        self.app = create_app(self.store, self.config)
        self._server = uvicorn.Server(
            uvicorn.Config(
                self.app,
                host="127.0.0.1",
                port=self.port,
                log_level="warning",
                lifespan="off",
            )
        )
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self) -> "LiveServer":
        self._thread.start()
        deadline = time.time() + 15
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("service did not come up")
            time.sleep(0.02)
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture
def live_server(tmp_path):
    server = LiveServer(tmp_path / "served-store").start()
    yield server
    server.stop()
