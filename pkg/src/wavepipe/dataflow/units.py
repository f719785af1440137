"""Data units: the items carried on stream connections.

A unit is a payload (scalar, float64 array, record or blob reference)
plus a metadata map, an optional provenance identity and a per-source
sequence number. Units have one canonical byte encoding so the
multiprocess transport and spill files are backend-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..canonical import canonical_bytes, from_canonical

INLINE_PAYLOAD_LIMIT = 1 << 20  # arrays above 1 MiB ride as blob references

SCALAR_TYPES = (int, float, str, bool, type(None))


@dataclass(frozen=True, slots=True)
class BlobRef:
    digest: str
    length: int


@dataclass(frozen=True, slots=True)
class DataUnit:
    payload: Any
    metadata: Mapping[str, Any] = field(default_factory=dict)
    prov_id: str | None = None
    seq: int = 0


def payload_kind(payload: Any) -> str:
    if isinstance(payload, BlobRef):
        return "blob"
    if isinstance(payload, np.ndarray):
        return "array"
    if isinstance(payload, Mapping):
        return "record"
    if isinstance(payload, SCALAR_TYPES):
        return "scalar"
    raise TypeError(f"unsupported payload type {type(payload).__name__}")


def payload_nbytes(payload: Any) -> int:
    """Rough in-memory size, used for the inline-vs-blob decision."""
    if isinstance(payload, BlobRef):
        return 0
    if isinstance(payload, np.ndarray):
        return payload.nbytes
    if isinstance(payload, Mapping):
        return sum(payload_nbytes(v) for v in payload.values()) + 16 * len(payload)
    if isinstance(payload, str):
        return len(payload)
    return 8


def encode_payload(payload: Any) -> dict:
    kind = payload_kind(payload)
    if kind == "blob":
        return {"kind": "blob", "digest": payload.digest, "length": payload.length}
    return {"kind": kind, "value": payload}


def decode_payload(doc: Mapping[str, Any]) -> Any:
    kind = doc["kind"]
    if kind == "blob":
        return BlobRef(digest=doc["digest"], length=int(doc["length"]))
    value = doc["value"]
    if kind == "array":
        return np.asarray(value, dtype=np.float64)
    return value


def encode_unit(unit: DataUnit) -> bytes:
    return canonical_bytes(
        {
            "metadata": dict(unit.metadata),
            "payload": encode_payload(unit.payload),
            "provId": unit.prov_id,
            "seq": unit.seq,
        }
    )


def decode_unit(frame: bytes) -> DataUnit:
    doc = from_canonical(frame)
    return DataUnit(
        payload=decode_payload(doc["payload"]),
        metadata=doc["metadata"],
        prov_id=doc["provId"],
        seq=int(doc["seq"]),
    )


def payloads_equal(a: Any, b: Any) -> bool:
    """Exact payload equality (bitwise for arrays)."""
    ka, kb = payload_kind(a), payload_kind(b)
    if ka != kb:
        return False
    if ka == "array":
        return a.shape == b.shape and bool(np.all(a.view(np.uint64) == b.view(np.uint64)))
    if ka == "record":
        if set(a.keys()) != set(b.keys()):
            return False
        return all(payloads_equal(a[k], b[k]) for k in a)
    if ka == "blob":
        return a == b
    return type(a) is type(b) and a == b
