"""Append-only lineage store with in-memory indexes.

One JSONL log file holds every record; indexes (by id, by metadata key,
by derivation adjacency) are rebuilt on open. Appends are serialized by
a lock; queries run concurrently and see a consistent prefix. Nothing
is ever mutated or deleted during a run.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..canonical import canonical_bytes, content_digest, from_canonical
from ..clock import SYSTEM_CLOCK
from ..errors import WavepipeError, error_code
from .records import DerivationEdge, EntityDraft, ProvActivity, ProvAgent, ProvEntity, RunEntry
from .triggers import Condition, FiredAction, InvalidPredicateKey, TriggerRule, UnknownSink

ANCESTORS = "ancestors"
DESCENDANTS = "descendants"

# Metadata keys the enactment layer stamps on every entity.
BUILTIN_KEYS = frozenset(
    {"payload.max", "payload.min", "payload.kind", "pe", "port", "run", "seq", "stage", "filename"}
)


@error_code("UnknownEntity")
class UnknownEntity(WavepipeError):
    pass


@error_code("UnknownRun")
class UnknownProvRun(WavepipeError):
    pass


@error_code("MalformedRange")
class MalformedRange(WavepipeError):
    pass


@error_code("DuplicateRecord")
class DuplicateRecord(WavepipeError):
    pass


@error_code("LineageCycle")
class LineageCycle(WavepipeError):
    pass


def validate_criteria(criteria: Mapping[str, Any]) -> dict[str, Any]:
    """Normalize query criteria: scalars match exactly, 2-element
    numeric sequences are closed ranges."""
    normalized: dict[str, Any] = {}
    for key, spec in criteria.items():
        if isinstance(spec, (list, tuple)):
            if len(spec) != 2 or not all(isinstance(v, (int, float)) for v in spec):
                raise MalformedRange(f"range for {key!r} must be two numbers, got {spec!r}")
            lo, hi = spec
            if lo > hi:
                raise MalformedRange(f"range for {key!r} has lo {lo} > hi {hi}")
            normalized[key] = (float(lo), float(hi))
        else:
            normalized[key] = spec
    return normalized


def match_metadata(meta: Mapping[str, Any], criteria: Mapping[str, Any]) -> bool:
    """Conjunction of exact matches and closed numeric ranges."""
    for key, spec in criteria.items():
        if key not in meta:
            return False
        value = meta[key]
        if isinstance(spec, tuple):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                return False
            if isinstance(value, float) and math.isnan(value):
                return False
            if not (spec[0] <= value <= spec[1]):
                return False
        else:
            if value != spec:
                return False
    return True


@dataclass(frozen=True)
class LineageSlice:
    root: str
    direction: str
    max_depth: int
    entities: tuple[ProvEntity, ...]
    edges: tuple[DerivationEdge, ...]
    expandable: tuple[str, ...]

    def to_document(self) -> dict:
        return {
            "direction": self.direction,
            "edges": [e.to_document() for e in self.edges],
            "entities": [e.to_document() for e in self.entities],
            "expandable": list(self.expandable),
            "maxDepth": self.max_depth,
            "root": self.root,
        }


@dataclass(frozen=True)
class StepResult:
    activity_id: str
    entity_ids: tuple[str, ...]
    fired: tuple[FiredAction, ...]


def runs_payload(entries: Sequence[RunEntry]) -> dict:
    """Canonical wire form of a run query result."""
    return {"runs": [e.to_document() for e in entries]}


def entities_payload(entities: Sequence[ProvEntity]) -> dict:
    """Canonical wire form of an entity query result."""
    return {"entities": [e.to_document() for e in entities]}


@dataclass
class _Indexes:
    agents: dict[str, ProvAgent] = field(default_factory=dict)
    runs: dict[str, RunEntry] = field(default_factory=dict)
    run_order: list[str] = field(default_factory=list)
    entities: dict[str, ProvEntity] = field(default_factory=dict)
    entity_order: list[str] = field(default_factory=list)
    activities: dict[str, ProvActivity] = field(default_factory=dict)
    derivations: list[DerivationEdge] = field(default_factory=list)
    parents: dict[str, list[DerivationEdge]] = field(default_factory=dict)
    children: dict[str, list[DerivationEdge]] = field(default_factory=dict)
    run_entities: dict[str, list[str]] = field(default_factory=dict)
    run_activities: dict[str, list[str]] = field(default_factory=dict)
    meta_keys: set[str] = field(default_factory=set)


class ProvenanceStore:
    """PROV-style lineage store. File-backed when given a path."""

    def __init__(self, path: str | Path | None = None, clock=SYSTEM_CLOCK):
        self._clock = clock
        self._lock = threading.RLock()
        self._ix = _Indexes()
        self._rules: dict[str, TriggerRule] = {}
        self._sinks: dict[str, Path] = {}
        self.notifications: dict[str, list[dict]] = {}
        self._path = Path(path) if path is not None else None
        self._log = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._replay()
            self._log = open(self._path, "ab")

    # --- persistence ------------------------------------------------------

    def _replay(self) -> None:
        with open(self._path, "rb") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = from_canonical(line)
                self._apply(rec["t"], rec["d"], persist=False)

    def _append_log(self, kind: str, doc: Mapping[str, Any]) -> None:
        if self._log is not None:
            self._log.write(canonical_bytes({"d": doc, "t": kind}) + b"\n")
            self._log.flush()

    def close(self) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None

    def state_digest(self) -> str:
        with self._lock:
            if self._path is not None and self._path.exists():
                return content_digest(self._path.read_bytes())
            ix = self._ix
            return content_digest(
                canonical_bytes(
                    [len(ix.agents), len(ix.runs), len(ix.entities), len(ix.activities), len(ix.derivations)]
                )
            )

    # --- record application -------------------------------------------------

    def _apply(self, kind: str, doc: Mapping[str, Any], persist: bool = True) -> None:
        ix = self._ix
        if kind == "agent":
            agent = ProvAgent(doc["agentId"], doc["displayName"], tuple(doc["runs"]))
            ix.agents[agent.agent_id] = agent
        elif kind == "run":
            entry = RunEntry(doc["runId"], doc["agentId"], doc["createdAt"], doc["metadata"])
            if entry.run_id in ix.runs:
                raise DuplicateRecord(f"run {entry.run_id!r} already recorded")
            ix.runs[entry.run_id] = entry
            ix.run_order.append(entry.run_id)
            ix.run_entities.setdefault(entry.run_id, [])
            ix.run_activities.setdefault(entry.run_id, [])
            ix.meta_keys.update(entry.metadata.keys())
            agent = ix.agents.get(entry.agent_id)
            if agent is not None:
                ix.agents[entry.agent_id] = ProvAgent(agent.agent_id, agent.display_name, agent.runs + (entry.run_id,))
        elif kind == "activity":
            act = ProvActivity.from_document(doc)
            if act.activity_id in ix.activities:
                raise DuplicateRecord(f"activity {act.activity_id!r} already recorded")
            ix.activities[act.activity_id] = act
            ix.run_activities.setdefault(act.run_id, []).append(act.activity_id)
        elif kind == "entity":
            ent = ProvEntity.from_document(doc)
            if ent.entity_id in ix.entities:
                raise DuplicateRecord(f"entity {ent.entity_id!r} already recorded")
            ix.entities[ent.entity_id] = ent
            ix.entity_order.append(ent.entity_id)
            ix.meta_keys.update(ent.metadata.keys())
            act = ix.activities.get(ent.generated_by)
            if act is not None:
                ix.run_entities.setdefault(act.run_id, []).append(ent.entity_id)
        elif kind == "derivation":
            edge = DerivationEdge(doc["derived"], doc["source"], doc["activityId"])
            if edge.derived == edge.source:
                raise LineageCycle(f"self-derivation on {edge.derived!r}")
            if self._reaches(edge.source, edge.derived):
                raise LineageCycle(f"derivation {edge.derived!r} <- {edge.source!r} would close a cycle")
            ix.derivations.append(edge)
            ix.parents.setdefault(edge.derived, []).append(edge)
            ix.children.setdefault(edge.source, []).append(edge)
        elif kind == "note":
            self.notifications.setdefault(doc["channel"], []).append(doc["message"])
        else:
            raise WavepipeError(f"unknown log record kind {kind!r}")
        if persist:
            self._append_log(kind, doc)

    def _reaches(self, start: str, goal: str) -> bool:
        """True when ``goal`` is an ancestor of ``start`` (cycle guard)."""
        if start == goal:
            return True
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for edge in self._ix.parents.get(node, ()):
                if edge.source == goal:
                    return True
                if edge.source not in seen:
                    seen.add(edge.source)
                    stack.append(edge.source)
        return False

    # --- writes -------------------------------------------------------------

    def register_agent(self, agent_id: str, display_name: str | None = None) -> ProvAgent:
        with self._lock:
            if agent_id not in self._ix.agents:
                self._apply("agent", {"agentId": agent_id, "displayName": display_name or agent_id, "runs": []})
            return self._ix.agents[agent_id]

    def register_run(self, run_id: str, agent_id: str = "local", metadata: Mapping[str, Any] | None = None) -> RunEntry:
        with self._lock:
            self.register_agent(agent_id)
            self._apply(
                "run",
                {"agentId": agent_id, "createdAt": self._clock.now(), "metadata": dict(metadata or {}), "runId": run_id},
            )
            return self._ix.runs[run_id]

    def has_run(self, run_id: str) -> bool:
        with self._lock:
            return run_id in self._ix.runs

    def record_step(
        self,
        run_id: str,
        *,
        activity_id: str,
        pe_instance: str,
        pe_name: str,
        pe_version: str = "1",
        parameters: Mapping[str, Any] | None = None,
        started_at: float | None = None,
        ended_at: float | None = None,
        status: str = "ok",
        error_message: str | None = None,
        input_entity_ids: Sequence[str] = (),
        outputs: Sequence[EntityDraft] = (),
    ) -> StepResult:
        """Record one processing step: an activity, one entity per
        output unit, and a derivation edge per (output, input) pair.

        Returns the fired trigger actions; callers decide how to act.
        """
        with self._lock:
            if run_id not in self._ix.runs:
                raise UnknownProvRun(f"no run {run_id!r} in lineage store")
            for eid in input_entity_ids:
                if eid not in self._ix.entities:
                    raise UnknownEntity(f"unknown input entity {eid!r}")
            now = self._clock.now()
            started = now if started_at is None else started_at
            ended = started if ended_at is None else ended_at
            self._apply(
                "activity",
                ProvActivity(
                    activity_id=activity_id,
                    run_id=run_id,
                    pe_instance=pe_instance,
                    pe_name=pe_name,
                    pe_version=pe_version,
                    parameters=dict(parameters or {}),
                    started_at=started,
                    ended_at=max(ended, started),
                    status=status,
                    error_message=error_message,
                ).to_document(),
            )
            fresh: list[tuple[str, dict]] = [
                (activity_id, {"peName": pe_name, "peInstance": pe_instance, "status": status, "run": run_id})
            ]
            entity_ids = []
            for draft in outputs:
                self._apply(
                    "entity",
                    ProvEntity(
                        entity_id=draft.entity_id,
                        payload_digest=draft.payload_digest,
                        metadata=dict(draft.metadata),
                        generated_by=activity_id,
                        at_time=ended,
                    ).to_document(),
                )
                entity_ids.append(draft.entity_id)
                fresh.append((draft.entity_id, dict(draft.metadata)))
                for source in input_entity_ids:
                    self._apply(
                        "derivation",
                        {"activityId": activity_id, "derived": draft.entity_id, "source": source},
                    )
            fired = self._evaluate(run_id, pe_name, fresh)
            return StepResult(activity_id=activity_id, entity_ids=tuple(entity_ids), fired=tuple(fired))

    def import_slice(
        self,
        run: RunEntry,
        agent: ProvAgent,
        activities: Sequence[ProvActivity],
        entities: Sequence[ProvEntity],
        derivations: Sequence[DerivationEdge],
    ) -> None:
        """Append a previously exported run slice verbatim.

        Timestamps and identifiers are preserved so a re-export of the
        slice is byte-identical to the original document.
        """
        with self._lock:
            if agent.agent_id not in self._ix.agents:
                self._apply("agent", {"agentId": agent.agent_id, "displayName": agent.display_name, "runs": []})
            self._apply("run", run.to_document())
            for act in sorted(activities, key=lambda a: a.activity_id):
                self._apply("activity", act.to_document())
            for ent in sorted(entities, key=lambda e: e.entity_id):
                self._apply("entity", ent.to_document())
            for edge in sorted(derivations, key=lambda e: (e.derived, e.source)):
                self._apply("derivation", edge.to_document())

    # --- triggers -----------------------------------------------------------

    def register_sink(self, name: str, path: str | Path) -> None:
        with self._lock:
            self._sinks[name] = Path(path)

    def sink_path(self, name: str) -> Path:
        with self._lock:
            if name not in self._sinks:
                raise UnknownSink(f"no sink {name!r}")
            return self._sinks[name]

    def declared_keys(self) -> set[str]:
        with self._lock:
            return set(BUILTIN_KEYS) | set(self._ix.meta_keys) | {"peName", "peInstance", "status"}

    def register_trigger(self, rule: TriggerRule, extra_keys: Iterable[str] = ()) -> None:
        """Validate and install a rule. Unknown predicate keys and
        unknown ship sinks are rejected here, not at fire time."""
        known = self.declared_keys() | set(extra_keys)
        for cond in rule.predicate:
            if cond.key not in known:
                raise InvalidPredicateKey(f"predicate key {cond.key!r} is not a declared metadata key")
        if rule.action == "shipEntity":
            if rule.target is None or rule.target not in self._sinks:
                raise UnknownSink(f"shipEntity target {rule.target!r} is not a registered sink")
        with self._lock:
            self._rules[rule.rule_id] = rule

    def rules(self) -> list[TriggerRule]:
        with self._lock:
            return sorted(self._rules.values(), key=lambda r: r.rule_id)

    def _evaluate(self, run_id: str, pe_name: str | None, fresh: list[tuple[str, dict]]) -> list[FiredAction]:
        fired: list[FiredAction] = []
        for rule in self.rules():
            if not rule.in_scope(run_id, pe_name):
                continue
            for record_id, meta in fresh:
                if rule.matches(meta):
                    fired.append(
                        FiredAction(
                            rule_id=rule.rule_id,
                            action=rule.action,
                            target=rule.target,
                            record_id=record_id,
                            run_id=run_id,
                        )
                    )
        return fired

    def evaluate_triggers(self, run_id: str, pe_name: str | None, fresh: list[tuple[str, dict]]) -> list[FiredAction]:
        """Match rules against fresh records; pure, no side effects."""
        with self._lock:
            return self._evaluate(run_id, pe_name, fresh)

    def notify(self, channel: str, message: Mapping[str, Any]) -> None:
        with self._lock:
            self._apply("note", {"channel": channel, "message": dict(message)})

    # --- reads ---------------------------------------------------------------

    def entity(self, entity_id: str) -> ProvEntity:
        with self._lock:
            ent = self._ix.entities.get(entity_id)
        if ent is None:
            raise UnknownEntity(f"no entity {entity_id!r}")
        return ent

    def activity(self, activity_id: str) -> ProvActivity:
        with self._lock:
            return self._ix.activities[activity_id]

    def agent(self, agent_id: str) -> ProvAgent:
        with self._lock:
            return self._ix.agents[agent_id]

    def run_entry(self, run_id: str) -> RunEntry:
        with self._lock:
            entry = self._ix.runs.get(run_id)
        if entry is None:
            raise UnknownProvRun(f"no run {run_id!r} in lineage store")
        return entry

    def entities_of_run(self, run_id: str) -> list[ProvEntity]:
        with self._lock:
            return [self._ix.entities[eid] for eid in self._ix.run_entities.get(run_id, [])]

    def activities_of_run(self, run_id: str) -> list[ProvActivity]:
        with self._lock:
            return [self._ix.activities[aid] for aid in self._ix.run_activities.get(run_id, [])]

    def derivations_of_run(self, run_id: str) -> list[DerivationEdge]:
        with self._lock:
            in_run = set(self._ix.run_entities.get(run_id, []))
            return [e for e in self._ix.derivations if e.derived in in_run]

    def counts(self) -> dict:
        with self._lock:
            ix = self._ix
            return {
                "agents": len(ix.agents),
                "activities": len(ix.activities),
                "derivations": len(ix.derivations),
                "entities": len(ix.entities),
                "runs": len(ix.runs),
            }

    def query_runs(self, criteria: Mapping[str, Any] | None = None) -> list[RunEntry]:
        """Runs whose metadata satisfies every conjunct, newest first."""
        normalized = validate_criteria(criteria or {})
        with self._lock:
            entries = [self._ix.runs[rid] for rid in self._ix.run_order]
        matched = [e for e in entries if match_metadata(e.metadata, normalized)]
        matched.sort(key=lambda e: (-e.created_at, e.run_id))
        return matched

    def query_entities(self, criteria: Mapping[str, Any] | None = None) -> list[ProvEntity]:
        normalized = validate_criteria(criteria or {})
        with self._lock:
            entities = [self._ix.entities[eid] for eid in self._ix.entity_order]
        matched = [e for e in entities if match_metadata(e.metadata, normalized)]
        matched.sort(key=lambda e: (-e.at_time, e.entity_id))
        return matched

    def trace_lineage(self, entity_id: str, direction: str = ANCESTORS, max_depth: int = 10) -> LineageSlice:
        """Entities reachable within ``max_depth`` derivation hops, the
        edges connecting them, and which frontier nodes can expand."""
        if direction not in (ANCESTORS, DESCENDANTS):
            raise WavepipeError(f"direction must be {ANCESTORS!r} or {DESCENDANTS!r}")
        if max_depth < 1:
            raise WavepipeError("maxDepth must be >= 1")
        self.entity(entity_id)
        with self._lock:
            step = self._ix.parents if direction == ANCESTORS else self._ix.children
            neighbour = (lambda e: e.source) if direction == ANCESTORS else (lambda e: e.derived)
            depth = {entity_id: 0}
            level = [entity_id]
            for d in range(max_depth):
                nxt = []
                for node in level:
                    for edge in step.get(node, ()):
                        other = neighbour(edge)
                        if other not in depth:
                            depth[other] = d + 1
                            nxt.append(other)
                level = sorted(nxt)
            in_slice = set(depth)
            edges = sorted(
                {
                    e
                    for node in in_slice
                    for e in (self._ix.parents.get(node, []) + self._ix.children.get(node, []))
                    if e.derived in in_slice and e.source in in_slice
                },
                key=lambda e: (e.derived, e.source, e.activity_id),
            )
            expandable = sorted(
                node
                for node, d in depth.items()
                if d == max_depth and any(neighbour(e) not in in_slice for e in step.get(node, ()))
            )
            entities = tuple(self._ix.entities[eid] for eid in sorted(in_slice))
        return LineageSlice(
            root=entity_id,
            direction=direction,
            max_depth=max_depth,
            entities=entities,
            edges=tuple(edges),
            expandable=tuple(expandable),
        )

    def has_ancestor_matching(self, entity_id: str, criteria: Mapping[str, Any]) -> tuple[bool, str | None]:
        """True iff some strict ancestor satisfies all conjuncts; the
        witness is the first match in breadth-first order."""
        normalized = validate_criteria(criteria)
        self.entity(entity_id)
        with self._lock:
            seen = {entity_id}
            level = [entity_id]
            while level:
                nxt = []
                for node in level:
                    for edge in self._ix.parents.get(node, ()):
                        if edge.source not in seen:
                            seen.add(edge.source)
                            nxt.append(edge.source)
                nxt.sort()
                for candidate in nxt:
                    if match_metadata(self._ix.entities[candidate].metadata, normalized):
                        return True, candidate
                level = nxt
        return False, None
