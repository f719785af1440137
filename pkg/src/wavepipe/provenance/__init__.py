"""Lineage capture, metadata queries, exports and runtime triggers."""

from .records import DerivationEdge, EntityDraft, ProvActivity, ProvAgent, ProvEntity, RunEntry
from .store import (
    LineageSlice,
    MalformedRange,
    ProvenanceStore,
    StepResult,
    UnknownEntity,
    match_metadata,
    validate_criteria,
)
from .triggers import Condition, FiredAction, InvalidPredicateKey, TriggerRule, UnknownSink
from .provdoc import export_prov_document, import_prov_document
from .manifest import build_download_manifest

__all__ = [
    "Condition",
    "DerivationEdge",
    "EntityDraft",
    "FiredAction",
    "InvalidPredicateKey",
    "LineageSlice",
    "MalformedRange",
    "ProvActivity",
    "ProvAgent",
    "ProvEntity",
    "ProvenanceStore",
    "RunEntry",
    "StepResult",
    "TriggerRule",
    "UnknownEntity",
    "UnknownSink",
    "build_download_manifest",
    "export_prov_document",
    "import_prov_document",
    "match_metadata",
    "validate_criteria",
]
