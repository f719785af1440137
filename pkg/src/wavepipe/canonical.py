"""Canonical JSON serialization.

One byte representation per value: UTF-8, sorted keys, compact
separators. Documents that must round-trip byte-identically (graph
files, lineage exports, gateway bodies) all go through these helpers.

float64 arrays are embedded as tagged base64 of little-endian bytes so
numeric payloads survive the trip bit-exactly.
"""

from __future__ import annotations

import base64
import hashlib
import json
from typing import Any

import numpy as np

ARRAY_TAG = "__f64le__"


def _encode_value(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        arr = np.asarray(value, dtype="<f8")
        return {ARRAY_TAG: base64.b64encode(arr.tobytes()).decode("ascii")}
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode_value(v) for v in value]
    return value


def _decode_value(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value.keys()) == {ARRAY_TAG}:
            raw = base64.b64decode(value[ARRAY_TAG])
            return np.frombuffer(raw, dtype="<f8").copy()
        return {k: _decode_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode_value(v) for v in value]
    return value


def canonical_json(obj: Any) -> str:
    return json.dumps(_encode_value(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(obj: Any) -> bytes:
    return canonical_json(obj).encode("utf-8")


def from_canonical(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return _decode_value(json.loads(data))


def content_digest(data: bytes) -> str:
    """sha256 hex digest used as content address throughout."""
    return hashlib.sha256(data).hexdigest()


def digest_of(obj: Any) -> str:
    return content_digest(canonical_bytes(obj))
