"""fluiddoc: middleware for fluid documents.

Documents are graphs of content-addressed text snippets composed through
first-class links: structural links build composites, transclusion links
reuse parts of other documents by reference, and navigational links
associate arbitrary entity sets in both directions. Per-entity rights,
context-based variant selection and federation across store instances are
applied when a document is rendered.
"""

from .blobs import BlobStore, fingerprint_of
from .errors import FluidError
from .federation import FederationClient
from .model import EntityRef, Link, Resource, RightsSpec, Selector, User, local_ref
from .render import RenderOptions, Renderer
from .store import DocumentStore
from .tree import RenderNode, RenderTree, flatten

__all__ = [
    "BlobStore",
    "DocumentStore",
    "EntityRef",
    "FederationClient",
    "FluidError",
    "Link",
    "RenderNode",
    "RenderOptions",
    "RenderTree",
    "Renderer",
    "Resource",
    "RightsSpec",
    "Selector",
    "User",
    "fingerprint_of",
    "flatten",
    "local_ref",
]

__version__ = "0.1.0"
