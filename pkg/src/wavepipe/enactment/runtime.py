"""Shared execution kernel.

A NodeHarness drives one element instance against its input and output
channels; the same harness runs under every backend, only the channel
implementations differ. Emissions made during one element invocation
form one provenance step: the step is recorded (and trigger rules
evaluated) before the units flow downstream, and before the element
sees its next unit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..canonical import canonical_bytes, content_digest
from ..dataflow.descriptors import Context, resolve_body
from ..dataflow.graph import NodeSpec
from ..dataflow.units import (
    INLINE_PAYLOAD_LIMIT,
    BlobRef,
    DataUnit,
    encode_payload,
    payload_kind,
    payload_nbytes,
)
from ..provenance.records import EntityDraft
from ..provenance.triggers import FiredAction, TriggerRule
from .channels import EOS, CancelledRun
from .events import ERROR, TRIGGER_FIRED, UNIT_PROCESSED

POLL_SLEEP = 0.001


def entity_id_for(run_id: str, pe: str, port: str, seq: int) -> str:
    return f"ent:{run_id}:{pe}:{port}:{seq}"


def activity_id_for(run_id: str, pe: str, n: int) -> str:
    return f"act:{run_id}:{pe}:{n}"


def payload_stats(payload: Any) -> dict[str, Any]:
    """max/min summary recorded as entity metadata; NaN propagates."""
    arrays: list[np.ndarray] = []
    if isinstance(payload, np.ndarray):
        arrays.append(payload)
    elif isinstance(payload, Mapping):
        arrays.extend(v for v in payload.values() if isinstance(v, np.ndarray))
    elif isinstance(payload, (int, float)) and not isinstance(payload, bool):
        return {"payload.max": float(payload), "payload.min": float(payload)}
    if not arrays or all(a.size == 0 for a in arrays):
        return {}
    values = np.concatenate([a.ravel() for a in arrays if a.size])
    return {"payload.max": float(np.max(values)), "payload.min": float(np.min(values))}


@dataclass(frozen=True)
class Emission:
    port: str
    unit: DataUnit
    derived_ids: tuple[str, ...]
    draft: EntityDraft


class StepRecorder:
    """Persists one element invocation and reports fired triggers."""

    def on_step(
        self,
        *,
        pe: str,
        pe_name: str,
        pe_version: str,
        parameters: Mapping[str, Any],
        activity_id: str,
        input_ids: Sequence[str],
        emissions: Sequence[Emission],
        started: float,
        ended: float,
        status: str = "ok",
        error_message: str | None = None,
    ) -> list[FiredAction]:
        raise NotImplementedError


class NullRecorder(StepRecorder):
    def on_step(self, **kwargs) -> list[FiredAction]:
        return []


class StoreRecorder(StepRecorder):
    """Records synchronously into an in-process lineage store."""

    def __init__(self, store, run_id: str):
        self.store = store
        self.run_id = run_id
        self.activity_ids: list[str] = []

    def on_step(self, *, pe, pe_name, pe_version, parameters, activity_id, input_ids, emissions, started, ended, status="ok", error_message=None):
        result = self.store.record_step(
            self.run_id,
            activity_id=activity_id,
            pe_instance=pe,
            pe_name=pe_name,
            pe_version=pe_version,
            parameters=parameters,
            started_at=started,
            ended_at=ended,
            status=status,
            error_message=error_message,
            input_entity_ids=list(input_ids),
            outputs=[e.draft for e in emissions],
        )
        self.activity_ids.append(activity_id)
        return list(result.fired)


class LocalTriggerRecorder(StepRecorder):
    """Worker-side recorder for the multiprocess backend.

    Evaluates trigger rules locally (so a cancel takes effect before the
    next unit) and ships the step to the coordinator for persistence.
    """

    def __init__(self, run_id: str, rules: Sequence[TriggerRule], send: Callable[[tuple], None]):
        self.run_id = run_id
        self.rules = list(rules)
        self.send = send

    def on_step(self, *, pe, pe_name, pe_version, parameters, activity_id, input_ids, emissions, started, ended, status="ok", error_message=None):
        step_doc = {
            "activityId": activity_id,
            "endedAt": ended,
            "errorMessage": error_message,
            "inputIds": list(input_ids),
            "outputs": [
                {"entityId": e.draft.entity_id, "digest": e.draft.payload_digest, "metadata": dict(e.draft.metadata)}
                for e in emissions
            ],
            "parameters": dict(parameters),
            "peInstance": pe,
            "peName": pe_name,
            "peVersion": pe_version,
            "startedAt": started,
            "status": status,
        }
        self.send(("prov", step_doc))
        fired: list[FiredAction] = []
        fresh = [(activity_id, {"peName": pe_name, "peInstance": pe, "status": status, "run": self.run_id})]
        fresh.extend((e.draft.entity_id, dict(e.draft.metadata)) for e in emissions)
        for rule in self.rules:
            if not rule.in_scope(self.run_id, pe_name):
                continue
            for record_id, meta in fresh:
                if rule.matches(meta):
                    fired.append(FiredAction(rule.rule_id, rule.action, rule.target, record_id, self.run_id))
        return fired


class EventSink:
    def emit(self, kind: str, pe: str | None, seq: int | None, detail: dict) -> None:
        raise NotImplementedError


class StoreEventSink(EventSink):
    def __init__(self, run_store, run_id: str):
        self.run_store = run_store
        self.run_id = run_id

    def emit(self, kind, pe, seq, detail):
        self.run_store.append_event(self.run_id, kind, pe=pe, seq=seq, detail=detail)


class QueueEventSink(EventSink):
    def __init__(self, send: Callable[[tuple], None]):
        self.send = send

    def emit(self, kind, pe, seq, detail):
        self.send(("event", {"detail": detail, "kind": kind, "pe": pe, "seq": seq}))


@dataclass
class RunContext:
    """Per-run state shared by every harness in one backend process."""

    run_id: str
    recorder: StepRecorder
    events: EventSink
    cancelled: Callable[[], bool]
    failed: Callable[[], bool]
    fail: Callable[[], None]
    blob_store: Any = None
    action_handler: Callable[[FiredAction, Sequence[Emission]], None] | None = None
    error_handler: Callable[[str, int, str], None] | None = None

    def stopped(self) -> bool:
        """Cancelled or failed: channels must unblock either way."""
        return self.cancelled() or self.failed()


class _EmitBuffer(Context):
    def __init__(self, harness: "NodeHarness"):
        self._harness = harness
        self.instance_id = harness.pe_id
        self.params = harness.parameters
        self.blob_store = harness.run_ctx.blob_store  # for BlobRef payloads
        self.pending: list[tuple[str, Any, dict, list | None]] = []

    def emit(self, port, payload, metadata=None, derived_from=None):
        if port not in self._harness.output_ports:
            raise ValueError(f"{self.instance_id}: unknown output port {port!r}")
        self.pending.append((port, payload, dict(metadata or {}), derived_from))

    def take(self):
        pending, self.pending = self.pending, []
        return pending


class NodeHarness:
    """One element instance plus its channel endpoints."""

    def __init__(
        self,
        run_ctx: RunContext,
        pe_id: str,
        spec: NodeSpec,
        inputs: Sequence[tuple[str, Any]],
        outputs: Mapping[str, Sequence[Any]],
        clock=None,
    ):
        self.run_ctx = run_ctx
        self.pe_id = pe_id
        self.spec = spec
        self.descriptor = spec.descriptor
        self.parameters = self.descriptor.effective_parameters(spec.parameters)
        self.inputs = list(inputs)
        self.outputs = {port: list(chans) for port, chans in outputs.items()}
        self.output_ports = set(self.descriptor.output_ports)
        self.clock = clock
        self._seq: dict[str, int] = {}
        self._activity_counter = 0
        self._ctx = _EmitBuffer(self)
        self.units_processed = 0

    # -- helpers ------------------------------------------------------------

    def _now(self) -> float:
        return self.clock.now() if self.clock is not None else time.time()

    def _next_seq(self, port: str) -> int:
        self._seq[port] = self._seq.get(port, 0) + 1
        return self._seq[port]

    def _next_activity_id(self) -> str:
        self._activity_counter += 1
        return activity_id_for(self.run_ctx.run_id, self.pe_id, self._activity_counter)

    def _maybe_blob(self, payload: Any) -> Any:
        store = self.run_ctx.blob_store
        if store is None or isinstance(payload, BlobRef):
            return payload
        if payload_nbytes(payload) > INLINE_PAYLOAD_LIMIT:
            data = canonical_bytes(encode_payload(payload))
            digest = store.put(data)
            return BlobRef(digest=digest, length=len(data))
        return payload

    def _finalize(self, raw: list, default_derived: Sequence[DataUnit]) -> list[Emission]:
        emissions = []
        for port, payload, metadata, derived_from in raw:
            payload = self._maybe_blob(payload)
            seq = self._next_seq(port)
            prov_id = entity_id_for(self.run_ctx.run_id, self.pe_id, port, seq)
            unit = DataUnit(payload=payload, metadata=metadata, prov_id=prov_id, seq=seq)
            derived = default_derived if derived_from is None else derived_from
            derived_ids = tuple(
                d.prov_id if isinstance(d, DataUnit) else str(d)
                for d in derived
                if not (isinstance(d, DataUnit) and d.prov_id is None)
            )
            meta = dict(metadata)
            meta.update(payload_stats(payload))
            meta.setdefault("payload.kind", payload_kind(payload))
            meta["pe"] = self.pe_id
            meta["port"] = port
            meta["run"] = self.run_ctx.run_id
            meta["seq"] = seq
            digest = content_digest(canonical_bytes(encode_payload(payload)))
            draft = EntityDraft(entity_id=prov_id, payload_digest=digest, metadata=meta)
            emissions.append(Emission(port=port, unit=unit, derived_ids=derived_ids, draft=draft))
        return emissions

    def _record(self, emissions: list[Emission], started: float, ended: float, status="ok", error_message=None) -> None:
        if not emissions and status == "ok":
            return
        input_ids: list[str] = []
        for emission in emissions:
            for derived_id in emission.derived_ids:
                if derived_id not in input_ids:
                    input_ids.append(derived_id)
        fired = self.run_ctx.recorder.on_step(
            pe=self.pe_id,
            pe_name=self.descriptor.name,
            pe_version=self.descriptor.version,
            parameters=self.parameters,
            activity_id=self._next_activity_id(),
            input_ids=input_ids,
            emissions=emissions,
            started=started,
            ended=ended,
            status=status,
            error_message=error_message,
        )
        for action in fired:
            self.run_ctx.events.emit(
                TRIGGER_FIRED,
                self.pe_id,
                None,
                {"action": action.action, "recordId": action.record_id, "ruleId": action.rule_id, "target": action.target},
            )
            if self.run_ctx.action_handler is not None:
                self.run_ctx.action_handler(action, emissions)

    def _deliver(self, emissions: list[Emission]) -> None:
        for emission in emissions:
            for channel in self.outputs.get(emission.port, ()):
                channel.put(emission.unit, cancelled=self.run_ctx.stopped)

    def _fail_step(self, exc: BaseException, started: float, seq_for_error: int | None) -> None:
        code = getattr(exc, "code", type(exc).__name__)
        message = f"{code}: {exc}"
        self.run_ctx.events.emit(ERROR, self.pe_id, seq_for_error, {"message": message})
        if self.run_ctx.error_handler is not None:
            self.run_ctx.error_handler(self.pe_id, seq_for_error or 0, message)
        self._ctx.take()  # discard partial emissions of the failed call
        self._record([], started, self._now(), status="error", error_message=message)
        self.run_ctx.fail()

    def _invoke(self, call, default_derived: Sequence[DataUnit], seq_for_error: int | None) -> bool:
        """Run one element call; returns False when the run must stop."""
        started = self._now()
        try:
            call()
        except Exception as exc:  # noqa: BLE001 - element failures become run failures
            self._fail_step(exc, started, seq_for_error)
            return False
        emissions = self._finalize(self._ctx.take(), default_derived)
        self._record(emissions, started, self._now())
        try:
            self._deliver(emissions)
        except CancelledRun:
            return False
        except Exception as exc:  # spill exhaustion and transport faults fail the run
            self._fail_step(exc, started, seq_for_error)
            return False
        return True

    # -- main loop ------------------------------------------------------------

    def run(self) -> None:
        try:
            self._run_inner()
        finally:
            self._close_outputs()

    def _run_inner(self) -> None:
        element = resolve_body(self.descriptor.body)(self.parameters)
        if not self._invoke(lambda: element.on_start(self._ctx), (), None):
            return

        open_channels = [(port, chan) for port, chan in self.inputs]
        blocking = len(open_channels) == 1
        while open_channels:
            if self.run_ctx.cancelled() or self.run_ctx.failed():
                break
            progressed = False
            for port, chan in list(open_channels):
                item = chan.get(cancelled=self.run_ctx.stopped) if blocking else chan.poll()
                if item is None:
                    continue
                if item is EOS:
                    open_channels.remove((port, chan))
                    blocking = len(open_channels) == 1
                    progressed = True
                    continue
                progressed = True
                unit: DataUnit = item
                ok = self._invoke(lambda: element.process(self._ctx, port, unit), (unit,), unit.seq)
                if not ok:
                    return
                self.units_processed += 1
                self.run_ctx.events.emit(UNIT_PROCESSED, self.pe_id, unit.seq, {"port": port})
                if self.run_ctx.cancelled() or self.run_ctx.failed():
                    break
            if not progressed and not blocking:
                time.sleep(POLL_SLEEP)

        if not (self.run_ctx.cancelled() or self.run_ctx.failed()):
            self._invoke(lambda: element.on_finish(self._ctx), (), None)

    def _close_outputs(self) -> None:
        for channels in self.outputs.values():
            for channel in channels:
                channel.close()


def feed_units(payloads: Sequence[Any], feed_name: str) -> list[DataUnit]:
    """External feed items become units with no provenance identity."""
    units = []
    for i, item in enumerate(payloads, start=1):
        if isinstance(item, DataUnit):
            units.append(DataUnit(payload=item.payload, metadata=dict(item.metadata), prov_id=None, seq=i))
        elif isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], dict):
            units.append(DataUnit(payload=item[0], metadata=dict(item[1]), prov_id=None, seq=i))
        else:
            units.append(DataUnit(payload=item, metadata={"feed": feed_name}, prov_id=None, seq=i))
    return units
