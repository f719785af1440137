"""Payload shipment for shipEntity trigger actions."""

from __future__ import annotations

import re
from pathlib import Path

from ..canonical import canonical_bytes
from ..dataflow.units import BlobRef, encode_payload


def write_ship_copy(action, emissions, sink_dir, blob_store=None) -> Path | None:
    """Copy the matched entity's payload bytes into the sink directory."""
    if sink_dir is None:
        return None
    unit = None
    for emission in emissions:
        if emission.unit.prov_id == action.record_id:
            unit = emission.unit
            break
    if unit is None:
        return None
    payload = unit.payload
    if isinstance(payload, BlobRef) and blob_store is not None:
        data = blob_store.get(payload.digest)
    else:
        data = canonical_bytes(encode_payload(payload))
    sink = Path(sink_dir)
    sink.mkdir(parents=True, exist_ok=True)
    name = re.sub(r"[^A-Za-z0-9._-]", "_", action.record_id) + ".json"
    path = sink / name
    path.write_bytes(data)
    return path
