"""Workflow graph construction.

Graphs are immutable after ``build_graph``; builders return new values.
A graph is a map of node instances, a list of stream connections, and
bindings of external feeds onto input ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import WavepipeError, error_code
from .descriptors import INPUT, OUTPUT, PEDescriptor, PortRef

DEFAULT_BUFFER_CAPACITY = 1024


@dataclass(frozen=True, slots=True)
class StreamConnection:
    source: PortRef
    target: PortRef
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY

    def __post_init__(self):
        if self.source.direction != OUTPUT or self.target.direction != INPUT:
            raise ValueError(f"connection must run output -> input, got {self.source} -> {self.target}")


def connect(from_pe: str, from_port: str, to_pe: str, to_port: str, capacity: int = DEFAULT_BUFFER_CAPACITY) -> StreamConnection:
    return StreamConnection(
        source=PortRef(from_pe, from_port, OUTPUT),
        target=PortRef(to_pe, to_port, INPUT),
        buffer_capacity=capacity,
    )


@dataclass(frozen=True, slots=True)
class NodeSpec:
    descriptor: PEDescriptor
    parameters: Mapping[str, Any] = field(default_factory=dict)


@error_code("InvalidGraph")
class GraphBuildError(WavepipeError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: Mapping[str, NodeSpec]
    edges: tuple[StreamConnection, ...]
    source_feeds: Mapping[str, PortRef] = field(default_factory=dict)

    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def edges_from(self, pe: str) -> list[StreamConnection]:
        return [e for e in self.edges if e.source.pe == pe]

    def edges_into(self, pe: str) -> list[StreamConnection]:
        return [e for e in self.edges if e.target.pe == pe]

    def feeds_into(self, pe: str) -> dict[str, PortRef]:
        return {name: ref for name, ref in self.source_feeds.items() if ref.pe == pe}

    def unconnected_input_ports(self) -> list[PortRef]:
        connected = {(e.target.pe, e.target.port) for e in self.edges}
        fed = {(r.pe, r.port) for r in self.source_feeds.values()}
        out = []
        for pe in self.node_ids():
            for port in self.nodes[pe].descriptor.input_ports:
                if (pe, port) not in connected and (pe, port) not in fed:
                    out.append(PortRef(pe, port, INPUT))
        return out

    def unconnected_output_ports(self) -> list[PortRef]:
        connected = {(e.source.pe, e.source.port) for e in self.edges}
        out = []
        for pe in self.node_ids():
            for port in self.nodes[pe].descriptor.output_ports:
                if (pe, port) not in connected:
                    out.append(PortRef(pe, port, OUTPUT))
        return out


def _normalize_nodes(nodes: Mapping[str, Any]) -> dict[str, NodeSpec]:
    out: dict[str, NodeSpec] = {}
    for pe_id, spec in nodes.items():
        if isinstance(spec, NodeSpec):
            out[pe_id] = spec
        elif isinstance(spec, PEDescriptor):
            out[pe_id] = NodeSpec(descriptor=spec)
        elif isinstance(spec, tuple) and len(spec) == 2:
            out[pe_id] = NodeSpec(descriptor=spec[0], parameters=dict(spec[1]))
        else:
            raise GraphBuildError(f"node {pe_id!r}: expected NodeSpec, descriptor or (descriptor, params)")
    return out


def build_graph(
    nodes: Mapping[str, Any],
    edges: list[StreamConnection] | tuple[StreamConnection, ...] = (),
    source_feeds: Mapping[str, PortRef] | None = None,
) -> WorkflowGraph:
    """Assemble and validate a workflow graph.

    Raises the typed error matching the first validation failure
    (DanglingPort, ParameterMismatch or CycleDetected), carrying the
    full report.
    """
    from .validation import raise_on_errors, validate_graph

    graph = WorkflowGraph(
        nodes=_normalize_nodes(nodes),
        edges=tuple(edges),
        source_feeds=dict(source_feeds or {}),
    )
    report = validate_graph(graph)
    raise_on_errors(report)
    return graph
