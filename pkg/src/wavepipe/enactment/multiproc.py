"""Multiprocess enactment.

Nodes are placed on worker processes according to the execution plan.
Connections inside one worker stay in memory; connections crossing
workers carry canonical binary frames over bounded multiprocessing
queues. Workers evaluate trigger rules locally (a matching cancel rule
sets the shared cancel event immediately) and stream events, lineage
steps and terminal outputs back to the coordinator, which owns the run
record and the lineage store.
"""

from __future__ import annotations

import multiprocessing as mp
import queue as queue_mod
import threading
from collections import deque
from typing import Any, Mapping, Sequence

from ..dataflow.graph import WorkflowGraph
from ..dataflow.units import decode_unit, encode_unit
from ..provenance.records import EntityDraft
from ..provenance.store import UnknownEntity
from ..provenance.triggers import FiredAction, TriggerRule
from .backends import Collector
from .channels import BoundedChannel, MpReceiverChannel, MpSenderChannel, SpillManager
from .events import ERROR
from .runtime import LocalTriggerRecorder, NodeHarness, QueueEventSink, RunContext, feed_units
from .ship import write_ship_copy

QUEUE_POLL = 0.01


def _mp_context():
    try:
        return mp.get_context("fork")
    except ValueError:  # pragma: no cover - non-POSIX fallback
        return mp.get_context()


def _worker_main(
    worker_index: int,
    graph: WorkflowGraph,
    assignment: Mapping[str, int],
    edge_queues: Mapping[int, Any],
    feed_queues: Mapping[str, Any],
    out_q,
    control_q,
    cancel_ev,
    fail_ev,
    run_id: str,
    rules: Sequence[TriggerRule],
    sink_paths: Mapping[str, str],
    blob_dir: str | None,
    spill_dir: str | None,
) -> None:
    send = control_q.put
    blob_store = None
    if blob_dir is not None:
        from ..blobstore import BlobStore

        blob_store = BlobStore(blob_dir)
    spill = SpillManager(spill_dir) if spill_dir is not None else None

    def handle_action(action: FiredAction, emissions) -> None:
        if action.action == "cancelRun":
            cancel_ev.set()
        elif action.action == "shipEntity":
            write_ship_copy(action, emissions, sink_paths.get(action.target or ""), blob_store)
        elif action.action == "notify":
            send(("notify", action.target, {"recordId": action.record_id, "ruleId": action.rule_id}))

    run_ctx = RunContext(
        run_id=run_id,
        recorder=LocalTriggerRecorder(run_id, rules, send),
        events=QueueEventSink(send),
        cancelled=cancel_ev.is_set,
        failed=fail_ev.is_set,
        fail=fail_ev.set,
        blob_store=blob_store,
        action_handler=handle_action,
        error_handler=lambda pe, seq, msg: send(("error", pe, seq, msg)),
    )

    mine = [pe for pe, w in assignment.items() if w == worker_index]
    inputs: dict[str, list[tuple[str, Any]]] = {pe: [] for pe in mine}
    outputs: dict[str, dict[str, list[Any]]] = {pe: {} for pe in mine}

    for i, edge in enumerate(graph.edges):
        src_local = assignment[edge.source.pe] == worker_index
        dst_local = assignment[edge.target.pe] == worker_index
        if src_local and dst_local:
            chan = BoundedChannel(edge.buffer_capacity, spill=spill, tag=f"w{worker_index}e{i}")
            outputs[edge.source.pe].setdefault(edge.source.port, []).append(chan)
            inputs[edge.target.pe].append((edge.target.port, chan))
        elif src_local:
            outputs[edge.source.pe].setdefault(edge.source.port, []).append(
                MpSenderChannel(edge_queues[i], spill=spill, tag=f"w{worker_index}e{i}")
            )
        elif dst_local:
            inputs[edge.target.pe].append((edge.target.port, MpReceiverChannel(edge_queues[i])))

    for name in sorted(graph.source_feeds):
        ref = graph.source_feeds[name]
        if assignment[ref.pe] == worker_index:
            inputs[ref.pe].append((ref.port, MpReceiverChannel(feed_queues[name])))

    class _OutputForwarder:
        def __init__(self, key: str):
            self.key = key

        def put(self, unit, cancelled=None):
            out_q.put(("unit", self.key, encode_unit(unit)))

        def close(self):
            pass

    for ref in graph.unconnected_output_ports():
        if assignment[ref.pe] == worker_index:
            outputs[ref.pe].setdefault(ref.port, []).append(_OutputForwarder(f"{ref.pe}.{ref.port}"))

    harnesses = [NodeHarness(run_ctx, pe, graph.nodes[pe], inputs[pe], outputs[pe]) for pe in sorted(mine)]
    threads = [threading.Thread(target=h.run, name=f"w{worker_index}-{h.pe_id}", daemon=True) for h in harnesses]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    control_q.put(("done", worker_index))


def _apply_prov_steps(prov_store, run_id: str, steps: deque) -> None:
    """Persist worker steps; cross-worker arrivals may be out of order,
    so retry steps whose input entities have not landed yet."""
    pending = deque(steps)
    while pending:
        progressed = False
        for _ in range(len(pending)):
            step = pending.popleft()
            try:
                prov_store.record_step(
                    run_id,
                    activity_id=step["activityId"],
                    pe_instance=step["peInstance"],
                    pe_name=step["peName"],
                    pe_version=step["peVersion"],
                    parameters=step["parameters"],
                    started_at=step["startedAt"],
                    ended_at=step["endedAt"],
                    status=step["status"],
                    error_message=step["errorMessage"],
                    input_entity_ids=step["inputIds"],
                    outputs=[
                        EntityDraft(o["entityId"], o["digest"], o["metadata"]) for o in step["outputs"]
                    ],
                )
                progressed = True
            except UnknownEntity:
                pending.append(step)
        if not progressed:
            step = pending.popleft()
            known = [eid for eid in step["inputIds"] if _entity_known(prov_store, eid)]
            step["inputIds"] = known
            pending.appendleft(step)


def _entity_known(prov_store, entity_id: str) -> bool:
    try:
        prov_store.entity(entity_id)
        return True
    except UnknownEntity:
        return False


def run_multiprocess(
    graph: WorkflowGraph,
    input_feeds: Mapping[str, Sequence[Any]],
    plan,
    *,
    run_id: str,
    run_store,
    prov_store=None,
    rules: Sequence[TriggerRule] = (),
    sink_paths: Mapping[str, str] | None = None,
    blob_dir: str | None = None,
    spill_dir: str | None = None,
    cancel_token: threading.Event,
    error_log: list,
) -> dict[str, Collector]:
    ctx = _mp_context()
    cancel_ev = ctx.Event()
    fail_ev = ctx.Event()
    control_q = ctx.Queue()
    out_q = ctx.Queue()

    assignment = dict(plan.partition_of)
    edge_queues = {
        i: ctx.Queue(maxsize=edge.buffer_capacity)
        for i, edge in enumerate(graph.edges)
        if assignment[edge.source.pe] != assignment[edge.target.pe]
    }
    feed_queues = {name: ctx.Queue(maxsize=256) for name in graph.source_feeds}

    workers = sorted(set(assignment.values()))
    procs = [
        ctx.Process(
            target=_worker_main,
            args=(
                w,
                graph,
                assignment,
                edge_queues,
                feed_queues,
                out_q,
                control_q,
                cancel_ev,
                fail_ev,
                run_id,
                list(rules),
                dict(sink_paths or {}),
                blob_dir,
                spill_dir,
            ),
            daemon=True,
        )
        for w in workers
    ]
    for p in procs:
        p.start()

    stop_bridge = threading.Event()

    def bridge_cancel():
        while not stop_bridge.is_set():
            if cancel_token.is_set():
                cancel_ev.set()
                return
            stop_bridge.wait(0.005)

    bridge = threading.Thread(target=bridge_cancel, daemon=True)
    bridge.start()

    def feeder(name: str):
        q = feed_queues[name]
        for unit in feed_units(list(input_feeds.get(name, ())), name):
            frame = encode_unit(unit)
            while True:
                if cancel_ev.is_set() or fail_ev.is_set():
                    break
                try:
                    q.put(frame, timeout=QUEUE_POLL)
                    break
                except queue_mod.Full:
                    continue
            if cancel_ev.is_set() or fail_ev.is_set():
                break
        q.put(("eos", None))

    feeders = [threading.Thread(target=feeder, args=(name,), daemon=True) for name in graph.source_feeds]
    for t in feeders:
        t.start()

    collectors: dict[str, Collector] = {
        f"{ref.pe}.{ref.port}": Collector() for ref in graph.unconnected_output_ports()
    }
    prov_steps: deque = deque()
    done: set[int] = set()

    def handle_control(msg) -> None:
        kind = msg[0]
        if kind == "event":
            doc = msg[1]
            run_store.append_event(run_id, doc["kind"], pe=doc["pe"], seq=doc["seq"], detail=doc["detail"])
        elif kind == "prov":
            prov_steps.append(msg[1])
        elif kind == "error":
            _, pe, seq, message = msg
            error_log.append({"message": message, "peInstance": pe, "seq": seq})
        elif kind == "notify":
            if prov_store is not None:
                prov_store.notify(msg[1], msg[2])
        elif kind == "done":
            done.add(msg[1])

    def drain_once(block: bool) -> bool:
        got = False
        try:
            msg = control_q.get(timeout=QUEUE_POLL) if block else control_q.get_nowait()
            handle_control(msg)
            got = True
        except queue_mod.Empty:
            pass
        while True:
            try:
                msg = out_q.get_nowait()
            except queue_mod.Empty:
                break
            _, key, frame = msg
            collectors[key].units.append(decode_unit(frame))
            got = True
        return got

    while len(done) < len(workers) or any(p.is_alive() for p in procs):
        drain_once(block=True)
    for p in procs:
        p.join(timeout=5)
    while drain_once(block=False):
        pass
    stop_bridge.set()
    for t in feeders:
        t.join(timeout=1)

    if prov_store is not None and prov_steps:
        _apply_prov_steps(prov_store, run_id, prov_steps)
    return collectors, cancel_ev.is_set()
