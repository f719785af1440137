"""Bulk data ingest: files become blob payloads plus searchable
lineage entities.

Malformed files are reported and never abort the batch; re-ingesting
the same bytes is detected by digest and adds nothing.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..blobstore import BlobStore
from ..canonical import canonical_bytes, content_digest
from ..clock import SYSTEM_CLOCK
from ..dataflow.units import encode_payload
from ..errors import WavepipeError, error_code
from ..provenance.records import EntityDraft
from ..provenance.store import ProvenanceStore
from .trace import MalformedTrace, Trace, read_csv_trace, read_trace, trace_metadata, trace_to_payload

FORMATS = ("traceDoc", "csv")


@error_code("PathUnreadable")
class PathUnreadable(WavepipeError):
    pass


@dataclass
class IngestReport:
    run_id: str
    cataloged: list[str] = field(default_factory=list)
    rejected: list[tuple[str, str]] = field(default_factory=list)
    duplicates: list[str] = field(default_factory=list)


def _candidate_files(root: Path, fmt: str | None) -> list[tuple[Path, str]]:
    out = []
    if fmt in (None, "traceDoc"):
        out.extend((p, "traceDoc") for p in sorted(root.glob("*.trc")))
    if fmt in (None, "csv"):
        out.extend((p, "csv") for p in sorted(root.glob("*.csv")))
    return out


def ingest_directory(
    path: str | Path,
    prov_store: ProvenanceStore,
    blob_store: BlobStore,
    fmt: str | None = None,
    agent: str = "ingest",
    clock=SYSTEM_CLOCK,
) -> IngestReport:
    root = Path(path)
    if not root.is_dir():
        raise PathUnreadable(f"{root} is not a readable directory")
    if fmt is not None and fmt not in FORMATS:
        raise WavepipeError(f"format must be one of {FORMATS}")

    run_id = f"ingest-{uuid.uuid4().hex[:12]}"
    prov_store.register_run(run_id, agent_id=agent, metadata={"kind": "ingest", "path": str(root)})
    report = IngestReport(run_id=run_id)

    known_digests = {e.payload_digest for e in prov_store.query_entities({})}
    counter = 0
    for file_path, file_fmt in _candidate_files(root, fmt):
        try:
            trace: Trace = read_trace(file_path) if file_fmt == "traceDoc" else read_csv_trace(file_path)
        except MalformedTrace as exc:
            report.rejected.append((file_path.name, str(exc)))
            continue
        except OSError as exc:
            report.rejected.append((file_path.name, f"unreadable: {exc}"))
            continue
        payload = trace_to_payload(trace)
        data = canonical_bytes(encode_payload(payload))
        digest = content_digest(data)
        if digest in known_digests:
            report.duplicates.append(file_path.name)
            continue
        blob_store.put(data)
        known_digests.add(digest)
        counter += 1
        meta = trace_metadata(trace)
        meta.update({"filename": file_path.name, "format": file_fmt, "stage": "raw"})
        entity_id = f"ing:{digest[:24]}"
        prov_store.record_step(
            run_id,
            activity_id=f"act:{run_id}:{counter}",
            pe_instance=f"ingest/{file_path.name}",
            pe_name="ingest.file",
            parameters={"format": file_fmt},
            started_at=clock.now(),
            ended_at=clock.now(),
            input_entity_ids=[],
            outputs=[EntityDraft(entity_id=entity_id, payload_digest=digest, metadata=meta)],
        )
        report.cataloged.append(entity_id)
    return report
