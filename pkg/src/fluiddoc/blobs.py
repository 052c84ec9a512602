"""Content-addressed blob store.

Every snippet payload is stored under a fingerprint derived from its raw
bytes (SHA-256, no normalization). Files live in a two-level hex fan-out
below the store root, named by the full digest:

    <root>/ab/cd/abcdef...   (64 hex chars)

Writes go to a temp file followed by an atomic rename, so concurrent puts
of the same content are safe and a put is idempotent.
"""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
from pathlib import Path

from .errors import NotFound, StorageFailure

FINGERPRINT_PREFIX = "sha256:"
_FINGERPRINT_RE = re.compile(r"^sha256:[0-9a-f]{64}$")


def fingerprint_of(data: bytes) -> str:
    """Canonical fingerprint of a byte sequence: ``sha256:`` + lowercase hex."""
    return FINGERPRINT_PREFIX + hashlib.sha256(data).hexdigest()


def is_fingerprint(value: str) -> bool:
    return bool(_FINGERPRINT_RE.match(value))


def _digest_hex(fp: str) -> str:
    if not is_fingerprint(fp):
        raise NotFound(f"malformed fingerprint: {value_preview(fp)}")
    return fp[len(FINGERPRINT_PREFIX):]


def value_preview(value: str, limit: int = 80) -> str:
    return value if len(value) <= limit else value[:limit] + "..."


class BlobStore:
    """Immutable blobs keyed by content fingerprint."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, fp: str) -> Path:
        hex_digest = _digest_hex(fp)
        return self.root / hex_digest[:2] / hex_digest[2:4] / hex_digest

    def put(self, data: bytes) -> str:
        """Store ``data`` and return its fingerprint. Idempotent."""
        fp = fingerprint_of(data)
        path = self._path(fp)
        if path.is_file():
            return fp
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        except OSError as exc:
            raise StorageFailure(f"cannot store blob: {exc}") from exc
        return fp

    def get(self, fp: str) -> bytes:
        """Return exactly the bytes originally put under ``fp``."""
        path = self._path(fp)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no blob for {value_preview(fp)}") from None
        except OSError as exc:
            raise StorageFailure(f"cannot read blob: {exc}") from exc

    def has(self, fp: str) -> bool:
        if not is_fingerprint(fp):
            return False
        return self._path(fp).is_file()

    def verify(self, fp: str, data: bytes) -> bool:
        """True iff the recomputed digest of ``data`` equals ``fp``."""
        return fingerprint_of(data) == fp

    def blob_count(self) -> int:
        return sum(1 for p in self.root.glob("*/*/*") if p.is_file())
