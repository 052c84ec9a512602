"""RESTful interface over one store instance.

All mutating requests funnel into the store's single writer; reads and
renders run concurrently. Every domain error maps to exactly one
(status, code) pair, serialized as ``{"error": {"code", "message"}}``.

Context for output adaptation arrives as ``ctx.<key>=<value>`` query
parameters; stored user preferences join the context as ``user.<key>``
entries, with request parameters taking precedence. Authentication is a
bearer token; no token means anonymous.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import access, adaptation
from .errors import (
    AuthRequired,
    FluidError,
    InvalidToken,
    NotOwner,
)
from .federation import FederationClient, normalize_store_uri
from .model import COMPOSITE, ORDER_PROPERTY, EntityRef, User
from .render import RenderOptions, Renderer
from .store import DocumentStore, entity_record
from .tree import tree_to_wire

ERROR_STATUS = {
    "unknown_entity": 404,
    "remote_not_found": 404,
    "not_found": 404,
    "empty_endpoint": 422,
    "bad_cardinality": 422,
    "range_out_of_bounds": 422,
    "unknown_fingerprint": 422,
    "fingerprint_forbidden_for_composite": 422,
    "not_a_text_resource": 422,
    "wrong_link_kind": 422,
    "invalid_utf8": 422,
    "structural_cycle": 409,
    "referenced_entity": 409,
    "ambiguous_parent": 409,
    "name_taken": 409,
    "not_owner": 403,
    "auth_required": 401,
    "invalid_token": 401,
    "integrity_mismatch": 502,
    "protocol_error": 502,
    "store_unreachable": 504,
    "storage_failure": 500,
    "internal_error": 500,
}


def map_error(err: FluidError) -> tuple[int, str]:
    """Total mapping from domain errors to (HTTP status, stable code)."""
    return ERROR_STATUS.get(err.code, 500), err.code


@dataclass
class ServiceConfig:
    store_path: str
    bind_address: str = "127.0.0.1:8470"
    advertised_uri: str = ""
    federation_ttl_seconds: float = 30.0

    def __post_init__(self):
        if not self.advertised_uri:
            self.advertised_uri = f"http://{self.bind_address}"
        self.advertised_uri = normalize_store_uri(self.advertised_uri)

    @property
    def host(self) -> str:
        return self.bind_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_address.rsplit(":", 1)[1])


def load_config(
    config_path: str | None = None,
    env: Mapping[str, str] | None = None,
    **overrides,
) -> ServiceConfig:
    """Resolve config: explicit overrides > FLUID_* env vars > file > defaults."""
    env = os.environ if env is None else env
    data: dict = {}
    if config_path:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))

    def pick(key: str, env_key: str | None, default=None):
        if overrides.get(key) is not None:
            return overrides[key]
        if env_key and env.get(env_key):
            return env[env_key]
        return data.get(key, default)

    store_path = pick("store_path", "FLUID_STORE_PATH")
    if not store_path:
        raise FluidError("no store path configured")
    return ServiceConfig(
        store_path=str(store_path),
        bind_address=str(pick("bind_address", "FLUID_BIND_ADDR", "127.0.0.1:8470")),
        advertised_uri=str(pick("advertised_uri", "FLUID_ADVERTISED_URI", "") or ""),
        federation_ttl_seconds=float(
            pick("federation_ttl_seconds", None, 30.0)
        ),
    )


# ----------------------------------------------------------------------
# request bodies


class RefIn(BaseModel):
    id: str
    store: str | None = None


class ResourceIn(BaseModel):
    media_type: str
    content: str | None = None
    name: str = ""
    properties: dict[str, str] = Field(default_factory=dict)


class SelectorIn(BaseModel):
    resource: str
    start: int
    end: int
    properties: dict[str, str] = Field(default_factory=dict)


class LinkIn(BaseModel):
    kind: str
    sources: list[RefIn]
    targets: list[RefIn]
    properties: dict[str, str] = Field(default_factory=dict)


class DocumentChildIn(BaseModel):
    ref: RefIn
    order: int


class DocumentIn(BaseModel):
    name: str = ""
    children: list[DocumentChildIn] = Field(default_factory=list)


class RightsIn(BaseModel):
    owner: str | None = None
    readers: list[str] = Field(default_factory=list)
    editors: list[str] = Field(default_factory=list)


class ContentUpdateIn(BaseModel):
    fingerprint: str


class UserIn(BaseModel):
    name: str
    properties: dict[str, str] = Field(default_factory=dict)


# ----------------------------------------------------------------------


def create_app(store: DocumentStore, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="fluiddoc", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    federation = FederationClient(
        own_uri=config.advertised_uri,
        ttl_seconds=config.federation_ttl_seconds,
    )
    renderer = Renderer(store, federation)
    app.state.store = store
    app.state.config = config
    app.state.federation = federation
    app.state.renderer = renderer

    def parse_ref(raw: RefIn) -> EntityRef:
        return federation.normalize(EntityRef(id=raw.id, store=raw.store))

    def current_user(request: Request) -> User | None:
        header = request.headers.get("authorization", "")
        if not header:
            return None
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token.strip():
            raise InvalidToken("expected 'Authorization: Bearer <token>'")
        user = store.user_by_token(token.strip())
        if user is None:
            raise InvalidToken("unknown token")
        return user

    @app.exception_handler(FluidError)
    async def _domain_error(request: Request, err: FluidError):
        status, code = map_error(err)
        return JSONResponse(
            status_code=status,
            content={"error": {"code": code, "message": err.message}},
        )

    @app.exception_handler(ValueError)
    async def _parameter_error(request: Request, err: ValueError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "invalid_request", "message": str(err)}},
        )

    # -- content ----------------------------------------------------------

    @app.post("/content", status_code=201)
    async def post_content(request: Request):
        data = await request.body()
        fp = store.blobs.put(data)
        return JSONResponse(
            status_code=201,
            content={"fingerprint": fp},
            headers={"Location": f"/content/{fp}"},
        )

    @app.get("/content/{fingerprint}")
    def get_content(fingerprint: str):
        data = store.blobs.get(fingerprint)
        media = store.media_type_for_content(fingerprint)
        content_type = {
            "text": "text/plain; charset=utf-8",
            "image": "application/octet-stream",
        }.get(media or "", "application/octet-stream")
        return Response(content=data, media_type=content_type)

    # -- entities ----------------------------------------------------------

    @app.post("/resources", status_code=201)
    def post_resource(body: ResourceIn):
        entity_id = store.create_resource(
            media_type=body.media_type,
            content=body.content,
            name=body.name,
            properties=body.properties,
        )
        return JSONResponse(
            status_code=201,
            content={"id": entity_id},
            headers={"Location": f"/entities/{entity_id}"},
        )

    @app.get("/entities/{entity_id}")
    def get_entity(entity_id: str):
        return entity_record(store.get_entity(entity_id))

    @app.post("/selectors", status_code=201)
    def post_selector(body: SelectorIn):
        entity_id = store.create_selector(
            resource=body.resource,
            start=body.start,
            end=body.end,
            properties=body.properties,
        )
        return JSONResponse(
            status_code=201,
            content={"id": entity_id},
            headers={"Location": f"/entities/{entity_id}"},
        )

    @app.post("/links", status_code=201)
    def post_link(body: LinkIn):
        entity_id = store.create_link(
            kind=body.kind,
            sources=[parse_ref(r) for r in body.sources],
            targets=[parse_ref(r) for r in body.targets],
            properties=body.properties,
        )
        return JSONResponse(
            status_code=201,
            content={"id": entity_id},
            headers={"Location": f"/entities/{entity_id}"},
        )

    @app.get("/entities/{entity_id}/links")
    def get_entity_links(
        entity_id: str, direction: str = "any", kind: str | None = None
    ):
        return {"links": store.links_of(entity_id, direction, kind or None)}

    @app.post("/documents", status_code=201)
    def post_document(body: DocumentIn):
        doc_id = store.create_resource(media_type=COMPOSITE, name=body.name)
        for child in body.children:
            store.create_link(
                kind="structural",
                sources=[EntityRef(id=doc_id)],
                targets=[parse_ref(child.ref)],
                properties={ORDER_PROPERTY: str(child.order)},
            )
        return JSONResponse(
            status_code=201,
            content={"id": doc_id},
            headers={"Location": f"/entities/{doc_id}"},
        )

    @app.get("/documents/{entity_id}/render")
    def get_render(entity_id: str, request: Request):
        user = current_user(request)
        params = request.query_params
        requested: dict[str, str] = {}
        for key, value in params.multi_items():
            if key.startswith("ctx."):
                requested[key[4:]] = value
        context = adaptation.build_context(
            user.properties if user else None, requested
        )
        options = RenderOptions(
            mode=params.get("mode", "snapshot"),
            max_depth=int(params.get("max_depth", 16)),
            context=context,
            user=user.id if user else None,
        )
        tree = renderer.render(EntityRef(id=entity_id), options)
        return tree_to_wire(tree)

    @app.put("/entities/{entity_id}/rights", status_code=204)
    def put_rights(entity_id: str, body: RightsIn, request: Request):
        user = current_user(request)
        acting = user.id if user else None
        owner = body.owner or acting
        if owner is None:
            raise NotOwner("rights need an owner; authenticate or name one")
        store.set_rights(
            entity_id,
            owner=owner,
            readers=body.readers,
            editors=body.editors,
            acting_user=acting,
        )
        return Response(status_code=204)

    @app.put("/resources/{entity_id}/content", status_code=204)
    def put_content_update(entity_id: str, body: ContentUpdateIn, request: Request):
        user = current_user(request)
        if not access.can_edit(store, user.id if user else None, entity_id):
            raise NotOwner(f"no edit rights on {entity_id}")
        store.update_resource_content(entity_id, body.fingerprint)
        return Response(status_code=204)

    @app.post("/users", status_code=201)
    def post_user(body: UserIn, request: Request):
        # bootstrap: the first user is created unauthenticated
        if store.user_count() > 0 and current_user(request) is None:
            raise AuthRequired("creating further users requires authentication")
        user = store.add_user(body.name, body.properties)
        return JSONResponse(
            status_code=201,
            content={"id": user.id, "token": user.token},
            headers={"Location": f"/users/{user.id}"},
        )

    @app.delete("/entities/{entity_id}", status_code=204)
    def delete_entity(entity_id: str, request: Request):
        user = current_user(request)
        if not access.can_edit(store, user.id if user else None, entity_id):
            raise NotOwner(f"no edit rights on {entity_id}")
        store.delete_entity(entity_id)
        return Response(status_code=204)

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    store = DocumentStore(config.store_path)
    app = create_app(store, config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
