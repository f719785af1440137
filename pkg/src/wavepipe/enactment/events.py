"""Run records and the per-run event feed.

One RunRecord per enactment; events are totally ordered by a per-run
counter. The store is written by the run coordinator only and may be
read concurrently by monitors and the gateway.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Iterator

from ..errors import WavepipeError, error_code

PENDING = "pending"
RUNNING = "running"
COMPLETED = "completed"
FAILED = "failed"
CANCELLED = "cancelled"
TERMINAL_STATES = (COMPLETED, FAILED, CANCELLED)

STATE_CHANGE = "stateChange"
UNIT_PROCESSED = "unitProcessed"
ERROR = "error"
TRIGGER_FIRED = "triggerFired"


@error_code("UnknownRun")
class UnknownRun(WavepipeError):
    pass


@error_code("AlreadyTerminal")
class AlreadyTerminal(WavepipeError):
    pass


@dataclass(frozen=True)
class RunEvent:
    run_id: str
    counter: int
    kind: str
    pe: str | None
    seq: int | None
    timestamp: float
    detail: dict

    def to_document(self) -> dict:
        return {
            "counter": self.counter,
            "detail": self.detail,
            "kind": self.kind,
            "pe": self.pe,
            "runId": self.run_id,
            "seq": self.seq,
            "timestamp": self.timestamp,
        }


@dataclass
class RunRecord:
    run_id: str
    graph_ref: str
    backend: str
    plan: Any = None
    status: str = PENDING
    started_at: float | None = None
    ended_at: float | None = None
    activity_ids: list[str] = field(default_factory=list)
    output_refs: dict[str, list[str]] = field(default_factory=dict)
    error_log: list[dict] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_document(self) -> dict:
        return {
            "activityIds": list(self.activity_ids),
            "backend": self.backend,
            "endedAt": self.ended_at,
            "errorLog": list(self.error_log),
            "graphRef": self.graph_ref,
            "metadata": dict(self.metadata),
            "outputRefs": {k: list(v) for k, v in self.output_refs.items()},
            "plan": self.plan.to_document() if self.plan is not None else None,
            "runId": self.run_id,
            "startedAt": self.started_at,
            "status": self.status,
        }


class RunStore:
    """Thread-safe registry of runs and their ordered event feeds."""

    def __init__(self, clock):
        self._clock = clock
        self._lock = threading.RLock()
        self._changed = threading.Condition(self._lock)
        self._records: dict[str, RunRecord] = {}
        self._events: dict[str, list[RunEvent]] = {}

    def create(self, record: RunRecord) -> RunRecord:
        with self._lock:
            self._records[record.run_id] = record
            self._events[record.run_id] = []
        return record

    def get(self, run_id: str) -> RunRecord:
        with self._lock:
            record = self._records.get(run_id)
        if record is None:
            raise UnknownRun(f"no run {run_id!r}")
        return record

    def all_runs(self) -> list[RunRecord]:
        with self._lock:
            return list(self._records.values())

    def append_event(self, run_id: str, kind: str, pe: str | None = None, seq: int | None = None, detail: dict | None = None) -> RunEvent:
        with self._lock:
            events = self._events[run_id]
            event = RunEvent(
                run_id=run_id,
                counter=len(events) + 1,
                kind=kind,
                pe=pe,
                seq=seq,
                timestamp=self._clock.now(),
                detail=detail or {},
            )
            events.append(event)
            self._changed.notify_all()
        return event

    def set_status(self, run_id: str, status: str) -> RunEvent:
        with self._lock:
            record = self._records[run_id]
            record.status = status
            if status == RUNNING and record.started_at is None:
                record.started_at = self._clock.now()
            if status in TERMINAL_STATES:
                record.ended_at = self._clock.now()
        return self.append_event(run_id, STATE_CHANGE, detail={"status": status})

    def events_since(self, run_id: str, counter: int = 0) -> list[RunEvent]:
        with self._lock:
            if run_id not in self._events:
                raise UnknownRun(f"no run {run_id!r}")
            return [e for e in self._events[run_id] if e.counter > counter]

    def follow(self, run_id: str, since: int = 0, poll: float = 0.05) -> Iterator[RunEvent]:
        """Yield events in order; stops after a terminal stateChange."""
        if run_id not in self._records:
            raise UnknownRun(f"no run {run_id!r}")
        cursor = since
        while True:
            batch = self.events_since(run_id, cursor)
            terminal_seen = False
            for event in batch:
                cursor = event.counter
                yield event
                if event.kind == STATE_CHANGE and event.detail.get("status") in TERMINAL_STATES:
                    terminal_seen = True
            if terminal_seen:
                return
            with self._changed:
                if not self.events_since(run_id, cursor):
                    self._changed.wait(timeout=poll)
