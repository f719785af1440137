"""Sequential and threaded enactment.

Sequential runs elements one at a time in topological order over
unbounded in-memory streams (the reference semantics). Threaded runs
one thread per element over bounded channels with blocking
backpressure, optionally spilling overflow to disk.
"""

from __future__ import annotations

import threading
from typing import Any, Mapping, Sequence

from ..dataflow.graph import WorkflowGraph
from ..dataflow.units import DataUnit
from ..dataflow.validation import topological_order
from .channels import BoundedChannel, ListChannel, SpillManager
from .runtime import NodeHarness, RunContext, feed_units


class Collector:
    """Terminal sink for an unconsumed output port."""

    def __init__(self):
        self.units: list[DataUnit] = []

    def put(self, unit: DataUnit, cancelled=None) -> None:
        self.units.append(unit)

    def close(self) -> None:
        pass


def _wire(
    graph: WorkflowGraph,
    input_feeds: Mapping[str, Sequence[Any]],
    make_channel,
):
    """Channel map for one run: per-edge channels, pre-filled feed
    channels, and collectors on unconsumed outputs."""
    edge_channels = [make_channel(edge) for edge in graph.edges]
    inputs: dict[str, list[tuple[str, Any]]] = {pe: [] for pe in graph.nodes}
    outputs: dict[str, dict[str, list[Any]]] = {pe: {} for pe in graph.nodes}

    for edge, channel in zip(graph.edges, edge_channels):
        inputs[edge.target.pe].append((edge.target.port, channel))
        outputs[edge.source.pe].setdefault(edge.source.port, []).append(channel)

    for name in sorted(graph.source_feeds):
        ref = graph.source_feeds[name]
        units = feed_units(list(input_feeds.get(name, ())), name)
        inputs[ref.pe].append((ref.port, ListChannel(units)))

    collectors: dict[str, Collector] = {}
    for ref in graph.unconnected_output_ports():
        collector = Collector()
        collectors[f"{ref.pe}.{ref.port}"] = collector
        outputs[ref.pe].setdefault(ref.port, []).append(collector)

    return inputs, outputs, collectors


def run_sequential(
    graph: WorkflowGraph,
    input_feeds: Mapping[str, Sequence[Any]],
    run_ctx: RunContext,
    clock=None,
) -> dict[str, Collector]:
    """Element-at-a-time enactment; upstream streams complete before
    downstream elements start."""
    inputs, outputs, collectors = _wire(graph, input_feeds, lambda edge: ListChannel())
    for pe in topological_order(graph):
        if run_ctx.stopped():
            break
        harness = NodeHarness(run_ctx, pe, graph.nodes[pe], inputs[pe], outputs[pe], clock=clock)
        harness.run()
    return collectors


def run_threaded(
    graph: WorkflowGraph,
    input_feeds: Mapping[str, Sequence[Any]],
    run_ctx: RunContext,
    clock=None,
    spill: SpillManager | None = None,
) -> dict[str, Collector]:
    """One thread per element over bounded backpressure channels."""
    inputs, outputs, collectors = _wire(
        graph,
        input_feeds,
        lambda edge: BoundedChannel(edge.buffer_capacity, spill=spill, tag=f"{edge.source.pe}.{edge.source.port}"),
    )
    harnesses = [
        NodeHarness(run_ctx, pe, graph.nodes[pe], inputs[pe], outputs[pe], clock=clock)
        for pe in graph.node_ids()
    ]
    threads = [threading.Thread(target=h.run, name=f"pe-{h.pe_id}", daemon=True) for h in harnesses]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return collectors
