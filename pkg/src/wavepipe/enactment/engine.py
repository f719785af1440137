"""The enactment engine: execute graphs, monitor and cancel runs.

One Engine owns a run store, an optional lineage store and a blob
store. ``execute`` runs synchronously and returns the RunRecord
whatever the terminal status; ``submit`` starts the same work on a
background thread and returns the run id immediately (the gateway's
asynchronous contract).
"""

from __future__ import annotations

import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

from ..blobstore import BlobStore
from ..clock import SYSTEM_CLOCK
from ..dataflow.composite import flatten_graph, terminal_port_aliases
from ..dataflow.graph import WorkflowGraph
from ..dataflow.serialize import graph_ref
from ..dataflow.units import DataUnit
from ..dataflow.validation import raise_on_errors, validate_graph
from ..errors import WavepipeError, error_code
from ..provenance.store import ProvenanceStore
from .backends import run_sequential, run_threaded
from .channels import CancelledRun, SpillManager
from .events import (
    CANCELLED,
    COMPLETED,
    FAILED,
    RUNNING,
    TERMINAL_STATES,
    AlreadyTerminal,
    RunEvent,
    RunRecord,
    RunStore,
    UnknownRun,
)
from .multiproc import run_multiprocess
from .partition import ExecutionPlan, partition_graph
from .runtime import NullRecorder, RunContext, StoreEventSink, StoreRecorder
from .ship import write_ship_copy

BACKENDS = ("sequential", "threaded", "multiprocess")


@error_code("PEFailure")
class PEFailure(WavepipeError):
    pass


@error_code("UnknownBackend")
class UnknownBackend(WavepipeError):
    pass


@error_code("PlanMismatch")
class PlanMismatch(WavepipeError):
    pass


@dataclass
class RunOptions:
    provenance_on: bool = False
    spill_on: bool = False
    workers: int = 2
    max_load: float | None = None
    run_metadata: dict = field(default_factory=dict)
    agent: str = "local"


@dataclass
class _RunHandle:
    record: RunRecord
    cancel_event: threading.Event = field(default_factory=threading.Event)
    done: threading.Event = field(default_factory=threading.Event)
    outputs: dict[str, list[DataUnit]] = field(default_factory=dict)
    thread: threading.Thread | None = None


class Engine:
    def __init__(
        self,
        data_dir: str | Path | None = None,
        clock=SYSTEM_CLOCK,
        prov_store: ProvenanceStore | None = None,
        blob_store: BlobStore | None = None,
        run_store: RunStore | None = None,
    ):
        self.clock = clock
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.run_store = run_store or RunStore(clock)
        self.prov_store = prov_store
        self.blob_store = blob_store
        if self.blob_store is None and self.data_dir is not None:
            self.blob_store = BlobStore(self.data_dir / "blobs")
        self._handles: dict[str, _RunHandle] = {}
        self._lock = threading.Lock()

    def provenance(self) -> ProvenanceStore:
        if self.prov_store is None:
            path = self.data_dir / "prov.jsonl" if self.data_dir is not None else None
            self.prov_store = ProvenanceStore(path, clock=self.clock)
        return self.prov_store

    # --- run lifecycle -------------------------------------------------------

    def _prepare(
        self,
        graph: WorkflowGraph,
        backend: str,
        plan: ExecutionPlan | None,
        input_feeds: Mapping[str, Sequence[Any]] | None,
        options: RunOptions | None,
    ):
        options = options or RunOptions()
        if backend not in BACKENDS:
            raise UnknownBackend(f"backend must be one of {BACKENDS}, got {backend!r}")
        report = validate_graph(graph)
        raise_on_errors(report)
        flat = flatten_graph(graph)
        aliases = terminal_port_aliases(graph)

        if backend == "multiprocess":
            if plan is None:
                plan = partition_graph(flat, options.workers, max_load_per_worker=options.max_load)
            elif set(plan.partition_of) != set(flat.nodes):
                raise PlanMismatch("plan does not cover exactly the graph's nodes")

        run_id = f"run-{uuid.uuid4().hex[:12]}"
        record = RunRecord(
            run_id=run_id,
            graph_ref=graph_ref(graph),
            backend=backend,
            plan=plan,
            metadata=dict(options.run_metadata),
        )
        self.run_store.create(record)
        handle = _RunHandle(record=record)
        with self._lock:
            self._handles[run_id] = handle

        prov = None
        if options.provenance_on:
            prov = self.provenance()
            prov.register_run(run_id, agent_id=options.agent, metadata=options.run_metadata)

        def body():
            self._run(record, flat, aliases, backend, plan, dict(input_feeds or {}), options, handle, prov)

        return record, handle, body

    def execute(
        self,
        graph: WorkflowGraph,
        backend: str = "sequential",
        plan: ExecutionPlan | None = None,
        input_feeds: Mapping[str, Sequence[Any]] | None = None,
        options: RunOptions | None = None,
    ) -> RunRecord:
        record, _handle, body = self._prepare(graph, backend, plan, input_feeds, options)
        body()
        return record

    def submit(
        self,
        graph: WorkflowGraph,
        backend: str = "sequential",
        plan: ExecutionPlan | None = None,
        input_feeds: Mapping[str, Sequence[Any]] | None = None,
        options: RunOptions | None = None,
    ) -> str:
        record, handle, body = self._prepare(graph, backend, plan, input_feeds, options)
        thread = threading.Thread(target=body, name=f"run-{record.run_id}", daemon=True)
        handle.thread = thread
        thread.start()
        return record.run_id

    def _spill_manager(self, run_id: str) -> SpillManager:
        root = (self.data_dir / "spill" / run_id) if self.data_dir is not None else Path(tempfile.mkdtemp(prefix="wavepipe-spill-"))
        return SpillManager(root)

    def _run(self, record, flat, aliases, backend, plan, input_feeds, options, handle, prov) -> None:
        run_id = record.run_id
        error_log: list[dict] = []
        failed_flag = threading.Event()
        cancel = handle.cancel_event
        spill = self._spill_manager(run_id) if options.spill_on else None
        recorder = StoreRecorder(prov, run_id) if prov is not None else NullRecorder()
        events = StoreEventSink(self.run_store, run_id)

        def on_action(action, emissions):
            if action.action == "cancelRun":
                cancel.set()
            elif action.action == "shipEntity" and prov is not None:
                write_ship_copy(action, emissions, prov.sink_path(action.target), self.blob_store)
            elif action.action == "notify" and prov is not None:
                prov.notify(action.target, {"recordId": action.record_id, "ruleId": action.rule_id})

        run_ctx = RunContext(
            run_id=run_id,
            recorder=recorder,
            events=events,
            cancelled=cancel.is_set,
            failed=failed_flag.is_set,
            fail=failed_flag.set,
            blob_store=self.blob_store,
            action_handler=on_action,
            error_handler=lambda pe, seq, msg: error_log.append({"message": msg, "peInstance": pe, "seq": seq}),
        )

        self.run_store.set_status(run_id, RUNNING)
        mp_cancelled = False
        try:
            if backend == "sequential":
                collectors = run_sequential(flat, input_feeds, run_ctx, clock=self.clock)
            elif backend == "threaded":
                collectors = run_threaded(flat, input_feeds, run_ctx, clock=self.clock, spill=spill)
            else:
                rules = prov.rules() if prov is not None else []
                sink_paths = {}
                for rule in rules:
                    if rule.action == "shipEntity" and rule.target:
                        sink_paths[rule.target] = str(prov.sink_path(rule.target))
                collectors, mp_cancelled = run_multiprocess(
                    flat,
                    input_feeds,
                    plan,
                    run_id=run_id,
                    run_store=self.run_store,
                    prov_store=prov,
                    rules=rules,
                    sink_paths=sink_paths,
                    blob_dir=str(self.blob_store.root) if self.blob_store is not None else None,
                    spill_dir=str(spill.root) if spill is not None else None,
                    cancel_token=cancel,
                    error_log=error_log,
                )
        except CancelledRun:
            collectors = {}

        if mp_cancelled:
            cancel.set()

        outputs: dict[str, list[DataUnit]] = {}
        for key, collector in collectors.items():
            outputs[aliases.get(key, key)] = list(collector.units)
        handle.outputs = outputs

        record.error_log = error_log
        if prov is not None:
            record.activity_ids = [a.activity_id for a in prov.activities_of_run(run_id)]
        if cancel.is_set():
            status = CANCELLED
        elif error_log or failed_flag.is_set():
            status = FAILED
        else:
            status = COMPLETED
            record.output_refs = {
                key: [u.prov_id for u in units] for key, units in outputs.items()
            }
        self.run_store.set_status(run_id, status)
        handle.done.set()

    # --- queries and control ---------------------------------------------------

    def run_record(self, run_id: str) -> RunRecord:
        return self.run_store.get(run_id)

    def wait(self, run_id: str, timeout: float | None = None) -> RunRecord:
        handle = self._handle(run_id)
        handle.done.wait(timeout)
        return handle.record

    def outputs(self, run_id: str) -> dict[str, list[DataUnit]]:
        return self._handle(run_id).outputs

    def output_payloads(self, run_id: str) -> dict[str, list[Any]]:
        return {key: [u.payload for u in units] for key, units in self.outputs(run_id).items()}

    def _handle(self, run_id: str) -> _RunHandle:
        with self._lock:
            handle = self._handles.get(run_id)
        if handle is None:
            raise UnknownRun(f"no run {run_id!r}")
        return handle

    def monitor(self, run_id: str, since: int = 0, follow: bool = True) -> Iterator[RunEvent]:
        if follow:
            return self.run_store.follow(run_id, since=since)
        return iter(self.run_store.events_since(run_id, since))

    def cancel(self, run_id: str, wait_timeout: float = 60.0) -> RunRecord:
        record = self.run_store.get(run_id)
        if record.status in TERMINAL_STATES:
            raise AlreadyTerminal(f"run {run_id} is already {record.status}")
        handle = self._handle(run_id)
        handle.cancel_event.set()
        handle.done.wait(wait_timeout)
        return record
