"""Command-line tool: store administration, import/export, linking, serving.

Commands speak either to a store directory directly (embedded mode,
``--store``) or to a running service (``--url``); both modes produce the
same observable results. Domain errors exit with code 2 and print the
stable error code on stderr.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import requests

from . import adaptation
from .errors import FluidError, InvalidToken, InvalidUtf8, error_for_code
from .federation import FederationClient
from .model import COMPOSITE, ORDER_PROPERTY, TEXT, EntityRef
from .render import RenderOptions, Renderer
from .store import DocumentStore, entity_record
from .tree import (
    ANN_LAYOUT,
    LAYOUT_INLINE,
    RenderTree,
    flatten,
    tree_from_wire,
)


def split_paragraphs(text: str) -> list[str]:
    """Paragraphs are runs of non-blank lines; one or more blank lines split."""
    paragraphs: list[str] = []
    current: list[str] = []
    for line in text.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            paragraphs.append("\n".join(current))
            current = []
    if current:
        paragraphs.append("\n".join(current))
    return paragraphs


def normalize_text(text: str) -> str:
    """Canonical form used by the import/export round trip: paragraphs
    separated by exactly one blank line and a single trailing newline."""
    paragraphs = split_paragraphs(text)
    if not paragraphs:
        return ""
    return "\n\n".join(paragraphs) + "\n"


def export_text(tree: RenderTree) -> str:
    """Flattened document text with a blank line between top-level children."""
    root = tree.root
    if root.kind == "composite" and root.annotations.get(ANN_LAYOUT) != LAYOUT_INLINE:
        parts = [flatten(child) for child in root.children]
        return "\n\n".join(parts)
    return flatten(root)


@dataclass
class ImportReport:
    document: str
    paragraph_count: int
    resource_ids: list[str]


# ----------------------------------------------------------------------
# backends


class EmbeddedBackend:
    def __init__(self, store_path: str, token: str | None):
        self.store = DocumentStore(store_path)
        self.renderer = Renderer(self.store, FederationClient(own_uri=None))
        self.token = token

    def _user(self):
        if not self.token:
            return None
        user = self.store.user_by_token(self.token)
        if user is None:
            raise InvalidToken("unknown token")
        return user

    def put_content(self, data: bytes) -> str:
        return self.store.blobs.put(data)

    def create_resource(self, media_type, content=None, name="", properties=None) -> str:
        return self.store.create_resource(media_type, content, name, properties or {})

    def create_selector(self, resource, start, end) -> str:
        return self.store.create_selector(resource, start, end)

    def create_link(self, kind, sources, targets, properties=None) -> str:
        return self.store.create_link(
            kind,
            [EntityRef.from_wire(r) for r in sources],
            [EntityRef.from_wire(r) for r in targets],
            properties or {},
        )

    def create_document(self, name, children) -> str:
        doc = self.store.create_resource(COMPOSITE, name=name)
        for raw_ref, order in children:
            self.store.create_link(
                "structural",
                [EntityRef(id=doc)],
                [EntityRef.from_wire(raw_ref)],
                {ORDER_PROPERTY: str(order)},
            )
        return doc

    def render_tree(self, entity_id, mode, max_depth, ctx) -> RenderTree:
        user = self._user()
        context = adaptation.build_context(user.properties if user else None, ctx)
        options = RenderOptions(
            mode=mode, max_depth=max_depth, context=context,
            user=user.id if user else None,
        )
        return self.renderer.render(EntityRef(id=entity_id), options)

    def entity_record(self, entity_id) -> dict:
        return entity_record(self.store.get_entity(entity_id))

    def add_user(self, name) -> dict:
        user = self.store.add_user(name)
        return {"id": user.id, "token": user.token}

    def set_rights(self, entity_id, owner, readers, editors) -> None:
        user = self._user()
        acting = user.id if user else None
        self.store.set_rights(
            entity_id, owner=owner or acting, readers=readers, editors=editors,
            acting_user=acting,
        )


class HttpBackend:
    def __init__(self, base_url: str, token: str | None):
        self.base = base_url.rstrip("/")
        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"

    def _check(self, resp: requests.Response):
        if resp.status_code < 400:
            return resp
        try:
            payload = resp.json()["error"]
            raise error_for_code(payload["code"], payload.get("message", ""))
        except (ValueError, KeyError):
            raise FluidError(f"{resp.request.url} answered {resp.status_code}")

    def _post(self, path, **kwargs):
        return self._check(self.session.post(self.base + path, **kwargs))

    def _get(self, path, **kwargs):
        return self._check(self.session.get(self.base + path, **kwargs))

    def put_content(self, data: bytes) -> str:
        return self._post("/content", data=data).json()["fingerprint"]

    def create_resource(self, media_type, content=None, name="", properties=None) -> str:
        body = {
            "media_type": media_type,
            "content": content,
            "name": name,
            "properties": properties or {},
        }
        return self._post("/resources", json=body).json()["id"]

    def create_selector(self, resource, start, end) -> str:
        body = {"resource": resource, "start": start, "end": end}
        return self._post("/selectors", json=body).json()["id"]

    def create_link(self, kind, sources, targets, properties=None) -> str:
        body = {
            "kind": kind,
            "sources": sources,
            "targets": targets,
            "properties": properties or {},
        }
        return self._post("/links", json=body).json()["id"]

    def create_document(self, name, children) -> str:
        body = {
            "name": name,
            "children": [{"ref": ref, "order": order} for ref, order in children],
        }
        return self._post("/documents", json=body).json()["id"]

    def render_tree(self, entity_id, mode, max_depth, ctx) -> RenderTree:
        params = {"mode": mode, "max_depth": str(max_depth)}
        for key, value in ctx.items():
            params[f"ctx.{key}"] = value
        raw = self._get(f"/documents/{entity_id}/render", params=params).json()
        return tree_from_wire(raw)

    def entity_record(self, entity_id) -> dict:
        return self._get(f"/entities/{entity_id}").json()

    def add_user(self, name) -> dict:
        return self._post("/users", json={"name": name}).json()

    def set_rights(self, entity_id, owner, readers, editors) -> None:
        body = {"owner": owner, "readers": list(readers), "editors": list(editors)}
        self._check(
            self.session.put(f"{self.base}/entities/{entity_id}/rights", json=body)
        )


# ----------------------------------------------------------------------
# shared operations


def import_text(backend, path: str, name: str) -> ImportReport:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise FluidError(f"no such file: {path}")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidUtf8(f"{path} is not valid UTF-8") from exc
    paragraphs = split_paragraphs(text)
    resource_ids = []
    children = []
    for index, paragraph in enumerate(paragraphs, start=1):
        fp = backend.put_content(paragraph.encode("utf-8"))
        rid = backend.create_resource(TEXT, content=fp, name=f"{name} [{index}]")
        resource_ids.append(rid)
        children.append(({"id": rid}, index))
    document = backend.create_document(name, children)
    return ImportReport(
        document=document,
        paragraph_count=len(paragraphs),
        resource_ids=resource_ids,
    )


# ----------------------------------------------------------------------
# commands


def _backend(ctx: click.Context):
    opts = ctx.obj
    if opts["url"]:
        return HttpBackend(opts["url"], opts["token"])
    if not opts["store"]:
        raise click.UsageError("choose a store with --store/--url/--config")
    return EmbeddedBackend(opts["store"], opts["token"])


def _run(fn):
    try:
        fn()
    except FluidError as err:
        click.echo(f"error: {err.code}: {err.message}", err=True)
        sys.exit(2)


@click.group()
@click.option("--store", envvar="FLUID_STORE_PATH", default=None,
              help="Store directory (embedded mode).")
@click.option("--url", default=None, help="Base URL of a running service.")
@click.option("--config", "config_path", default=None,
              help="JSON config file (store_path, bind_address, ...).")
@click.option("--token", default=None, help="Bearer token to act as a user.")
@click.pass_context
def main(ctx, store, url, config_path, token):
    """Fluid document store: snippets, links, transclusion, composition."""
    source = ctx.get_parameter_source("store")
    store_explicit = store is not None and source.name == "COMMANDLINE"
    chosen = [
        flag
        for flag, given in (
            ("--store", store_explicit),
            ("--url", url is not None),
            ("--config", config_path is not None),
        )
        if given
    ]
    if len(chosen) > 1:
        raise click.UsageError(" and ".join(chosen) + " are mutually exclusive")
    if config_path and not url:
        from .service import load_config

        store = load_config(config_path).store_path
    ctx.obj = {"store": store, "url": url, "token": token, "config": config_path}


@main.command()
@click.option("--bind", default=None, help="host:port to bind.")
@click.option("--advertise", default=None, help="Base URI peers should use.")
@click.pass_context
def serve(ctx, bind, advertise):
    """Run the REST service over the configured store."""
    from .service import load_config, serve as run_service

    def go():
        config = load_config(
            ctx.obj["config"],
            store_path=ctx.obj["store"],
            bind_address=bind,
            advertised_uri=advertise,
        )
        run_service(config)

    _run(go)


@main.command("import")
@click.argument("path")
@click.option("--name", default=None, help="Document name (defaults to filename).")
@click.pass_context
def import_cmd(ctx, path, name):
    """Import a UTF-8 text file, one resource per blank-line paragraph."""

    def go():
        report = import_text(_backend(ctx), path, name or Path(path).name)
        click.echo(f"document: {report.document}")
        click.echo(f"paragraphs: {report.paragraph_count}")

    _run(go)


@main.command()
@click.argument("document")
@click.option("--mode", default="snapshot", type=click.Choice(["snapshot", "live"]))
@click.option("--max-depth", default=16, type=int)
@click.option("--ctx", "ctx_entries", multiple=True, metavar="KEY=VALUE",
              help="Context entry, repeatable.")
@click.pass_context
def export(ctx, document, mode, max_depth, ctx_entries):
    """Print the rendered document as plain text."""

    def go():
        context = dict(entry.split("=", 1) for entry in ctx_entries)
        tree = _backend(ctx).render_tree(document, mode, max_depth, context)
        text = export_text(tree)
        if text:
            click.echo(text)

    _run(go)


@main.group()
def user():
    """User management."""


@user.command("add")
@click.argument("name")
@click.pass_context
def user_add(ctx, name):
    """Create a user and print its id and bearer token."""

    def go():
        created = _backend(ctx).add_user(name)
        click.echo(f"id: {created['id']}")
        click.echo(f"token: {created['token']}")

    _run(go)


@main.group()
def rights():
    """Per-entity access rights."""


@rights.command("set")
@click.argument("entity")
@click.option("--owner", default=None, help="Owner user id (defaults to caller).")
@click.option("--readers", multiple=True, help="Reader user id or PUBLIC, repeatable.")
@click.option("--editors", multiple=True, help="Editor user id, repeatable.")
@click.pass_context
def rights_set(ctx, entity, owner, readers, editors):
    """Set the rights spec of an entity (caller must own it or be first)."""

    def go():
        _backend(ctx).set_rights(entity, owner, list(readers), list(editors))
        click.echo("ok")

    _run(go)


@main.group()
def link():
    """Link management."""


@link.command("create")
@click.option("--kind", default="navigational",
              type=click.Choice(["navigational", "structural", "transclusion"]))
@click.option("--source", "sources", multiple=True, help="Source entity id, repeatable.")
@click.option("--target", "targets", multiple=True, help="Target entity id, repeatable.")
@click.option("--property", "properties", multiple=True, metavar="KEY=VALUE")
@click.pass_context
def link_create(ctx, kind, sources, targets, properties):
    """Create a link between existing entities."""

    def go():
        props = dict(entry.split("=", 1) for entry in properties)
        link_id = _backend(ctx).create_link(
            kind,
            [{"id": s} for s in sources],
            [{"id": t} for t in targets],
            props,
        )
        click.echo(f"link: {link_id}")

    _run(go)


@main.command()
@click.option("--origin-selector", required=True, help="Selector whose text is reused.")
@click.option("--into", "document", required=True, help="Host document id (for reference).")
@click.option("--at", "position", required=True, metavar="RESOURCE:OFFSET",
              help="Host resource and character offset for the anchor.")
@click.pass_context
def transclude(ctx, origin_selector, document, position):
    """Inject a selector's content into a host resource at an offset."""

    def go():
        resource, _, offset = position.rpartition(":")
        if not resource:
            raise FluidError("--at expects RESOURCE:OFFSET")
        at = int(offset)
        backend = _backend(ctx)
        anchor = backend.create_selector(resource, at, at)
        link_id = backend.create_link(
            "transclusion", [{"id": origin_selector}], [{"id": anchor}]
        )
        click.echo(f"anchor: {anchor}")
        click.echo(f"link: {link_id}")

    _run(go)


@main.group()
def entity():
    """Entity inspection."""


@entity.command("show")
@click.argument("entity_id")
@click.pass_context
def entity_show(ctx, entity_id):
    """Print the entity record as JSON."""

    def go():
        record = _backend(ctx).entity_record(entity_id)
        click.echo(json.dumps(record, indent=2, sort_keys=True))

    _run(go)


if __name__ == "__main__":
    main()
