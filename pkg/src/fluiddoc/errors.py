"""Error hierarchy shared by every layer.

Each error carries a stable machine-readable ``code`` so the REST layer and
the CLI can map exceptions to wire errors without string matching.
"""

from __future__ import annotations


class FluidError(Exception):
    """Base class; ``code`` is stable across releases."""

    code = "internal_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class UnknownEntity(FluidError):
    code = "unknown_entity"


class UnknownFingerprint(FluidError):
    code = "unknown_fingerprint"


class FingerprintForbiddenForComposite(FluidError):
    code = "fingerprint_forbidden_for_composite"


class NotATextResource(FluidError):
    code = "not_a_text_resource"


class RangeOutOfBounds(FluidError):
    code = "range_out_of_bounds"


class InvalidUtf8(FluidError):
    code = "invalid_utf8"


class EmptyEndpoint(FluidError):
    code = "empty_endpoint"


class BadCardinality(FluidError):
    code = "bad_cardinality"


class StructuralCycle(FluidError):
    code = "structural_cycle"


class ReferencedEntity(FluidError):
    code = "referenced_entity"

    def __init__(self, message: str = "", referencing: tuple[str, ...] = ()):
        super().__init__(message)
        self.referencing = referencing


class NotFound(FluidError):
    code = "not_found"


class StorageFailure(FluidError):
    code = "storage_failure"


class NotOwner(FluidError):
    code = "not_owner"


class AmbiguousParent(FluidError):
    code = "ambiguous_parent"


class WrongLinkKind(FluidError):
    code = "wrong_link_kind"


class NameTaken(FluidError):
    code = "name_taken"


class AuthRequired(FluidError):
    code = "auth_required"


class InvalidToken(FluidError):
    code = "invalid_token"


class StoreUnreachable(FluidError):
    code = "store_unreachable"


class RemoteNotFound(FluidError):
    code = "remote_not_found"


class ProtocolError(FluidError):
    code = "protocol_error"


class IntegrityMismatch(FluidError):
    code = "integrity_mismatch"


_BY_CODE = {
    cls.code: cls
    for cls in list(globals().values())
    if isinstance(cls, type) and issubclass(cls, FluidError)
}


def error_for_code(code: str, message: str = "") -> FluidError:
    """Reconstruct an error from its wire code (used by the HTTP client)."""
    cls = _BY_CODE.get(code, FluidError)
    err = cls(message)
    if cls is FluidError:
        err.code = code or FluidError.code
    return err
