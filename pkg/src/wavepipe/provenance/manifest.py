"""Bulk download manifests.

A manifest is a fetcher-neutral executable listing: one
(URL, digest, destination) triple per selected entity, tab-separated,
with '#' comment headers. Any downloader (curl loop, python script,
workflow element) can replay it; the digest verifies each file.
"""

from __future__ import annotations

import re
from typing import Iterable

from .records import ProvEntity

HEADER = "#!/usr/bin/env wavepipe-fetch"


def _destination(entity: ProvEntity) -> str:
    name = entity.metadata.get("filename")
    if not name:
        name = f"{entity.entity_id}.bin"
    return re.sub(r"[^A-Za-z0-9._-]", "_", str(name))


def build_download_manifest(entities: Iterable[ProvEntity], base_url: str) -> str:
    """Manifest whose entries equal the given query result set."""
    base = base_url.rstrip("/")
    lines = [
        HEADER,
        "# columns: url<TAB>sha256<TAB>destination",
    ]
    for entity in entities:
        url = f"{base}/blobs/{entity.payload_digest}"
        lines.append(f"{url}\t{entity.payload_digest}\t{_destination(entity)}")
    return "\n".join(lines) + "\n"


def manifest_entries(script: str) -> list[tuple[str, str, str]]:
    """Parse a manifest back into (url, digest, destination) triples."""
    out = []
    for line in script.splitlines():
        if not line or line.startswith("#"):
            continue
        url, digest, dest = line.split("\t")
        out.append((url, digest, dest))
    return out
