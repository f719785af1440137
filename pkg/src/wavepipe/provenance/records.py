"""Lineage store record types.

Entities are data items (digest + metadata, payload lives in the blob
store), activities are the processing steps that generated them, and
derivation edges connect outputs to the inputs they came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping


@dataclass(frozen=True)
class ProvEntity:
    entity_id: str
    payload_digest: str
    metadata: Mapping[str, Any]
    generated_by: str
    at_time: float

    def to_document(self) -> dict:
        return {
            "atTime": self.at_time,
            "entityId": self.entity_id,
            "generatedBy": self.generated_by,
            "metadata": dict(self.metadata),
            "payloadDigest": self.payload_digest,
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "ProvEntity":
        return ProvEntity(
            entity_id=doc["entityId"],
            payload_digest=doc["payloadDigest"],
            metadata=doc["metadata"],
            generated_by=doc["generatedBy"],
            at_time=doc["atTime"],
        )


@dataclass(frozen=True)
class ProvActivity:
    activity_id: str
    run_id: str
    pe_instance: str
    pe_name: str
    pe_version: str
    parameters: Mapping[str, Any]
    started_at: float
    ended_at: float
    status: str = "ok"
    error_message: str | None = None

    def to_document(self) -> dict:
        return {
            "activityId": self.activity_id,
            "endedAt": self.ended_at,
            "errorMessage": self.error_message,
            "parameters": dict(self.parameters),
            "peInstance": self.pe_instance,
            "peName": self.pe_name,
            "peVersion": self.pe_version,
            "runId": self.run_id,
            "startedAt": self.started_at,
            "status": self.status,
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "ProvActivity":
        return ProvActivity(
            activity_id=doc["activityId"],
            run_id=doc["runId"],
            pe_instance=doc["peInstance"],
            pe_name=doc["peName"],
            pe_version=doc["peVersion"],
            parameters=doc["parameters"],
            started_at=doc["startedAt"],
            ended_at=doc["endedAt"],
            status=doc["status"],
            error_message=doc["errorMessage"],
        )


@dataclass(frozen=True)
class DerivationEdge:
    derived: str
    source: str
    activity_id: str

    def to_document(self) -> dict:
        return {"activityId": self.activity_id, "derived": self.derived, "source": self.source}


@dataclass(frozen=True)
class ProvAgent:
    agent_id: str
    display_name: str
    runs: tuple[str, ...] = ()

    def to_document(self) -> dict:
        return {"agentId": self.agent_id, "displayName": self.display_name, "runs": list(self.runs)}


@dataclass(frozen=True)
class RunEntry:
    run_id: str
    agent_id: str
    created_at: float
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict:
        return {
            "agentId": self.agent_id,
            "createdAt": self.created_at,
            "metadata": dict(self.metadata),
            "runId": self.run_id,
        }


@dataclass(frozen=True)
class EntityDraft:
    """Pending entity handed to record_step by the enactment layer."""

    entity_id: str
    payload_digest: str
    metadata: Mapping[str, Any]
