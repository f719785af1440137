"""All-pairs correlation graphs.

n channels produce n(n-1)/2 unordered pairs: per channel a windowing
element and a preparation chain, per pair a correlator and a stacker.
The quadratic fan-in is the whole point; graphs build fine for large n,
execution is for desk-scale channel counts.
"""

from __future__ import annotations

import json
from typing import Any, Mapping, Sequence

from ..canonical import canonical_json
from ..dataflow.descriptors import PortRef, atomic
from ..dataflow.graph import WorkflowGraph, build_graph, connect
from ..errors import WavepipeError, error_code
from .elements import CORRELATE_SCHEMA, PREP_SCHEMA, WINDOW_SCHEMA
from .trace import Trace, trace_to_payload


@error_code("TooFewChannels")
class TooFewChannels(WavepipeError):
    pass


def default_prep_steps(lo: float | None = None, hi: float | None = None, taper_fraction: float = 0.05) -> list[dict]:
    """demean -> detrend -> taper, plus bandpass when a band is given."""
    steps = [
        {"kind": "demean", "params": {}},
        {"kind": "detrend", "params": {}},
        {"kind": "taper", "params": {"fraction": taper_fraction}},
    ]
    if lo is not None and hi is not None:
        steps.append({"kind": "bandpass", "params": {"lo": lo, "hi": hi}})
    return steps


def feed_name(i: int) -> str:
    return f"chan{i:03d}"


def build_all_pairs_graph(
    n_channels: int,
    max_lag_samples: int,
    window_seconds: float,
    prep_steps: Sequence[Mapping[str, Any]] | None = None,
) -> WorkflowGraph:
    """Window -> prep per channel, correlate -> stack per pair."""
    if n_channels < 2:
        raise TooFewChannels(f"need at least 2 channels, got {n_channels}")
    window_desc = atomic("seismo.window", "seismo.window", schema=WINDOW_SCHEMA)
    prep_desc = atomic("seismo.prep", "seismo.prep", schema=PREP_SCHEMA)
    corr_desc = atomic(
        "seismo.correlate",
        "seismo.correlate",
        inputs=("in_a", "in_b"),
        schema=CORRELATE_SCHEMA,
        stateful=True,
    )
    stack_desc = atomic("seismo.stack", "seismo.stack", stateful=True)

    steps_json = canonical_json(list(prep_steps if prep_steps is not None else default_prep_steps()))
    nodes: dict[str, Any] = {}
    edges = []
    feeds = {}
    for i in range(n_channels):
        win = f"win{i:03d}"
        prep = f"prep{i:03d}"
        nodes[win] = (window_desc, {"windowSeconds": window_seconds})
        nodes[prep] = (prep_desc, {"steps": steps_json})
        edges.append(connect(win, "out", prep, "in"))
        feeds[feed_name(i)] = PortRef(win, "in", "input")
    for i in range(n_channels):
        for j in range(i + 1, n_channels):
            corr = f"corr{i:03d}_{j:03d}"
            stack = f"stack{i:03d}_{j:03d}"
            nodes[corr] = (corr_desc, {"maxLagSamples": max_lag_samples})
            nodes[stack] = (stack_desc, {})
            edges.append(connect(f"prep{i:03d}", "out", corr, "in_a"))
            edges.append(connect(f"prep{j:03d}", "out", corr, "in_b"))
            edges.append(connect(corr, "out", stack, "in"))
    return build_graph(nodes, edges, feeds)


def all_pairs_feeds(traces: Sequence[Trace]) -> dict[str, list]:
    return {feed_name(i): [trace_to_payload(t)] for i, t in enumerate(traces)}


def correlation_node_count(graph: WorkflowGraph) -> int:
    return sum(1 for pe in graph.nodes if pe.startswith("corr"))


def parse_prep_steps(steps_json: str) -> list[dict]:
    return json.loads(steps_json)
