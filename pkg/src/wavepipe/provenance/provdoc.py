"""W3C-PROV style export and re-import of run slices.

A document holds the run's entity/activity/agent records plus
wasGeneratedBy / wasDerivedFrom / wasAssociatedWith relations, in
canonical key order. export -> import -> export is byte-identical.
"""

from __future__ import annotations

from typing import Any, Mapping

from ..canonical import canonical_bytes
from .records import DerivationEdge, ProvActivity, ProvAgent, ProvEntity, RunEntry
from .store import ProvenanceStore

NS = "wp"


def export_prov_document(store: ProvenanceStore, run_id: str) -> dict:
    run = store.run_entry(run_id)
    agent = store.agent(run.agent_id)
    activities = sorted(store.activities_of_run(run_id), key=lambda a: a.activity_id)
    entities = sorted(store.entities_of_run(run_id), key=lambda e: e.entity_id)
    derivations = sorted(store.derivations_of_run(run_id), key=lambda e: (e.derived, e.source))

    doc: dict[str, Any] = {
        "prov:activity": {
            a.activity_id: {
                "prov:endTime": a.ended_at,
                "prov:startTime": a.started_at,
                f"{NS}:errorMessage": a.error_message,
                f"{NS}:parameters": dict(a.parameters),
                f"{NS}:peInstance": a.pe_instance,
                f"{NS}:peName": a.pe_name,
                f"{NS}:peVersion": a.pe_version,
                f"{NS}:status": a.status,
            }
            for a in activities
        },
        "prov:agent": {agent.agent_id: {"prov:label": agent.display_name}},
        "prov:entity": {
            e.entity_id: {
                "prov:generatedAtTime": e.at_time,
                f"{NS}:digest": e.payload_digest,
                f"{NS}:metadata": dict(e.metadata),
            }
            for e in entities
        },
        "prov:wasAssociatedWith": {
            f"assoc~{a.activity_id}": {"prov:activity": a.activity_id, "prov:agent": agent.agent_id}
            for a in activities
        },
        "prov:wasDerivedFrom": {
            f"der~{d.derived}~{d.source}": {
                "prov:activity": d.activity_id,
                "prov:generatedEntity": d.derived,
                "prov:usedEntity": d.source,
            }
            for d in derivations
        },
        "prov:wasGeneratedBy": {
            f"gen~{e.entity_id}": {
                "prov:activity": e.generated_by,
                "prov:entity": e.entity_id,
                "prov:time": e.at_time,
            }
            for e in entities
        },
        f"{NS}:run": run.to_document(),
    }
    return doc


def export_prov_bytes(store: ProvenanceStore, run_id: str) -> bytes:
    return canonical_bytes(export_prov_document(store, run_id))


def import_prov_document(store: ProvenanceStore, doc: Mapping[str, Any]) -> str:
    """Recreate the exported slice in ``store``; returns the run id."""
    run_doc = doc[f"{NS}:run"]
    run = RunEntry(
        run_id=run_doc["runId"],
        agent_id=run_doc["agentId"],
        created_at=run_doc["createdAt"],
        metadata=run_doc["metadata"],
    )
    (agent_id, agent_doc), = doc["prov:agent"].items()
    agent = ProvAgent(agent_id=agent_id, display_name=agent_doc["prov:label"])

    activities = [
        ProvActivity(
            activity_id=act_id,
            run_id=run.run_id,
            pe_instance=a[f"{NS}:peInstance"],
            pe_name=a[f"{NS}:peName"],
            pe_version=a[f"{NS}:peVersion"],
            parameters=a[f"{NS}:parameters"],
            started_at=a["prov:startTime"],
            ended_at=a["prov:endTime"],
            status=a[f"{NS}:status"],
            error_message=a[f"{NS}:errorMessage"],
        )
        for act_id, a in doc["prov:activity"].items()
    ]
    generated_by = {g["prov:entity"]: g["prov:activity"] for g in doc["prov:wasGeneratedBy"].values()}
    entities = [
        ProvEntity(
            entity_id=ent_id,
            payload_digest=e[f"{NS}:digest"],
            metadata=e[f"{NS}:metadata"],
            generated_by=generated_by[ent_id],
            at_time=e["prov:generatedAtTime"],
        )
        for ent_id, e in doc["prov:entity"].items()
    ]
    derivations = [
        DerivationEdge(derived=d["prov:generatedEntity"], source=d["prov:usedEntity"], activity_id=d["prov:activity"])
        for d in doc["prov:wasDerivedFrom"].values()
    ]
    store.import_slice(run, agent, activities, entities, derivations)
    return run.run_id
