"""Content-addressed blob store.

Payloads above the inline threshold, spilled stream buffers and
ingested files all land here, keyed by sha256 digest. The store counts
writes so tests can assert the no-disk fast path (no temporary files
unless spilling or oversized payloads force them).
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

from .canonical import content_digest
from .errors import WavepipeError, error_code


@error_code("BlobMissing")
class BlobMissing(WavepipeError):
    pass


class BlobStore:
    """Filesystem blob store with write instrumentation.

    Thread-safe; writes are atomic (temp file then rename) so concurrent
    workers sharing the directory never observe partial blobs.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.writes = 0

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest[2:]

    def put(self, data: bytes) -> str:
        digest = content_digest(data)
        path = self._path(digest)
        if path.exists():
            return digest
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_bytes(data)
        os.replace(tmp, path)
        with self._lock:
            self.writes += 1
        return digest

    def get(self, digest: str) -> bytes:
        path = self._path(digest)
        if not path.exists():
            raise BlobMissing(f"no blob {digest}")
        return path.read_bytes()

    def has(self, digest: str) -> bool:
        return self._path(digest).exists()

    def size(self, digest: str) -> int:
        path = self._path(digest)
        if not path.exists():
            raise BlobMissing(f"no blob {digest}")
        return path.stat().st_size

    def file_count(self) -> int:
        return sum(1 for p in self.root.rglob("*") if p.is_file())
