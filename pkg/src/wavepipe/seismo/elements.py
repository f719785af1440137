"""Stream elements wrapping the seismology kernels.

Registered in the element catalog so all-pairs graphs serialize and run
on any backend. Trace payloads are records (see trace_to_payload);
correlation payloads likewise.
"""

from __future__ import annotations

import json
from collections import deque

from ..dataflow.descriptors import Element, ParamSpec, register_element
from .correlate import (
    correlation_from_payload,
    correlation_to_payload,
    cross_correlate,
    stack_correlations,
)
from .trace import trace_from_payload, trace_metadata, trace_to_payload
from .transforms import apply_trace_transform

WINDOW_SCHEMA = {"windowSeconds": ParamSpec("float", required=True)}
PREP_SCHEMA = {"steps": ParamSpec("string", default="[]")}
CORRELATE_SCHEMA = {"maxLagSamples": ParamSpec("int", required=True)}


@register_element("seismo.window")
class WindowElement(Element):
    """Splits a trace into consecutive fixed-length windows."""

    def __init__(self, params):
        self.window_seconds = float(params["windowSeconds"])
        if self.window_seconds <= 0:
            raise ValueError("windowSeconds must be positive")

    def process(self, ctx, port, unit):
        from dataclasses import replace

        trace = trace_from_payload(unit.payload)
        per_window = int(round(self.window_seconds / trace.dt))
        if per_window < 1:
            raise ValueError("window shorter than one sample")
        count = trace.n // per_window
        for w in range(count):
            segment = trace.samples[w * per_window : (w + 1) * per_window]
            piece = replace(trace, samples=segment, start_time=trace.start_time + w * per_window * trace.dt)
            meta = trace_metadata(piece)
            meta.update({"stage": "window", "window": w})
            ctx.emit("out", trace_to_payload(piece), metadata=meta)


@register_element("seismo.prep")
class PrepElement(Element):
    """Applies a transform chain to each incoming trace window."""

    def __init__(self, params):
        self.steps = json.loads(params.get("steps", "[]"))

    def process(self, ctx, port, unit):
        trace = trace_from_payload(unit.payload)
        for step in self.steps:
            trace = apply_trace_transform(step["kind"], step.get("params", {}), trace)
        meta = trace_metadata(trace)
        meta.update({"stage": "prep", "window": unit.metadata.get("window", 0)})
        ctx.emit("out", trace_to_payload(trace), metadata=meta)


@register_element("seismo.correlate")
class CorrelateElement(Element):
    """Pairs windows from two channels in arrival order and correlates."""

    def __init__(self, params):
        self.max_lag = int(params["maxLagSamples"])
        self.pending_a: deque = deque()
        self.pending_b: deque = deque()

    def process(self, ctx, port, unit):
        (self.pending_a if port == "in_a" else self.pending_b).append(unit)
        while self.pending_a and self.pending_b:
            ua = self.pending_a.popleft()
            ub = self.pending_b.popleft()
            a = trace_from_payload(ua.payload)
            b = trace_from_payload(ub.payload)
            result = cross_correlate(a, b, self.max_lag)
            meta = {
                "pair": f"{result.pair[0]}|{result.pair[1]}",
                "stage": "correlation",
                "window": ua.metadata.get("window", 0),
            }
            ctx.emit("out", correlation_to_payload(result), metadata=meta, derived_from=[ua, ub])


@register_element("seismo.stack")
class StackElement(Element):
    """Collects per-window correlations and emits their linear stack."""

    def __init__(self, params):
        self.collected: list = []

    def process(self, ctx, port, unit):
        self.collected.append(unit)

    def on_finish(self, ctx):
        if not self.collected:
            return
        results = [correlation_from_payload(u.payload) for u in self.collected]
        stacked = stack_correlations(results)
        meta = {
            "pair": f"{stacked.pair[0]}|{stacked.pair[1]}",
            "stage": "stack",
            "windowCount": stacked.window_count,
        }
        ctx.emit("out", correlation_to_payload(stacked), metadata=meta, derived_from=list(self.collected))
