"""Composite elements: a subgraph wrapped as a single descriptor.

A composite behaves, under execution, exactly like inlining its inner
graph: backends call ``flatten_graph`` first, so inner nodes run as
ordinary atomic elements under namespaced instance ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from ..errors import WavepipeError, error_code
from .descriptors import INPUT, OUTPUT, PEDescriptor, PortRef
from .graph import NodeSpec, StreamConnection, WorkflowGraph
from .validation import validate_graph


@error_code("PortNotExposed")
class PortNotExposed(WavepipeError):
    pass


@error_code("InnerGraphInvalid")
class InnerGraphInvalid(WavepipeError):
    pass


@dataclass(frozen=True)
class CompositeBody:
    graph: WorkflowGraph
    input_bindings: Mapping[str, PortRef]   # outer input port -> inner input port
    output_bindings: Mapping[str, PortRef]  # outer output port -> inner output port


def _auto_names(refs: Iterable[PortRef]) -> dict[str, PortRef]:
    refs = list(refs)
    by_port: dict[str, int] = {}
    for ref in refs:
        by_port[ref.port] = by_port.get(ref.port, 0) + 1
    named = {}
    for ref in refs:
        name = ref.port if by_port[ref.port] == 1 else f"{ref.pe}_{ref.port}"
        named[name] = ref
    return named


def wrap_subgraph(
    graph: WorkflowGraph,
    exposed_inputs: Mapping[str, PortRef] | Iterable[PortRef],
    exposed_outputs: Mapping[str, PortRef] | Iterable[PortRef],
    name: str,
    version: str = "1",
) -> PEDescriptor:
    """Wrap ``graph`` as a composite descriptor exposing the given ports.

    Exposed ports must be unconnected ports of the inner graph; exposing
    a port that is already connected (or fed) raises PortNotExposed.
    """
    report = validate_graph(graph)
    if not report.ok:
        first = report.errors()[0]
        raise InnerGraphInvalid(f"{first.code}: {first.message}")

    if not isinstance(exposed_inputs, Mapping):
        exposed_inputs = _auto_names(exposed_inputs)
    if not isinstance(exposed_outputs, Mapping):
        exposed_outputs = _auto_names(exposed_outputs)

    free_inputs = {(r.pe, r.port) for r in graph.unconnected_input_ports()}
    free_outputs = {(r.pe, r.port) for r in graph.unconnected_output_ports()}
    for outer, ref in exposed_inputs.items():
        if ref.direction != INPUT or (ref.pe, ref.port) not in free_inputs:
            raise PortNotExposed(f"{ref} is not an unconnected input of the inner graph")
    for outer, ref in exposed_outputs.items():
        if ref.direction != OUTPUT or (ref.pe, ref.port) not in free_outputs:
            raise PortNotExposed(f"{ref} is not an unconnected output of the inner graph")

    return PEDescriptor(
        name=name,
        version=version,
        input_ports=tuple(exposed_inputs),
        output_ports=tuple(exposed_outputs),
        stateful=any(spec.descriptor.stateful for spec in graph.nodes.values()),
        parameter_schema={},
        kind="composite",
        body=CompositeBody(
            graph=graph,
            input_bindings=dict(exposed_inputs),
            output_bindings=dict(exposed_outputs),
        ),
    )


def flatten_graph(graph: WorkflowGraph) -> WorkflowGraph:
    """Expand composite nodes recursively into atomic nodes.

    Inner instance ids are namespaced ``outer/inner``. Connections and
    feeds touching composite ports are rewired to the bound inner ports.
    Terminal composite output ports keep their payload sequence because
    rewiring only renames endpoints.
    """
    if all(spec.descriptor.kind == "atomic" for spec in graph.nodes.values()):
        return graph

    nodes: dict[str, NodeSpec] = {}
    # Maps from composite-port coordinates to inner coordinates.
    input_map: dict[tuple[str, str], PortRef] = {}
    output_map: dict[tuple[str, str], PortRef] = {}

    for pe_id in graph.node_ids():
        spec = graph.nodes[pe_id]
        if spec.descriptor.kind == "atomic":
            nodes[pe_id] = spec
            continue
        body: CompositeBody = spec.descriptor.body
        inner = flatten_graph(body.graph)
        for inner_id, inner_spec in inner.nodes.items():
            nodes[f"{pe_id}/{inner_id}"] = inner_spec
        for outer_port, ref in body.input_bindings.items():
            input_map[(pe_id, outer_port)] = PortRef(f"{pe_id}/{ref.pe}", ref.port, INPUT)
        for outer_port, ref in body.output_bindings.items():
            output_map[(pe_id, outer_port)] = PortRef(f"{pe_id}/{ref.pe}", ref.port, OUTPUT)

    def rewrite_inner_edge(pe_id: str, edge: StreamConnection) -> StreamConnection:
        return StreamConnection(
            source=PortRef(f"{pe_id}/{edge.source.pe}", edge.source.port, OUTPUT),
            target=PortRef(f"{pe_id}/{edge.target.pe}", edge.target.port, INPUT),
            buffer_capacity=edge.buffer_capacity,
        )

    edges: list[StreamConnection] = []
    for pe_id in graph.node_ids():
        spec = graph.nodes[pe_id]
        if spec.descriptor.kind == "composite":
            inner = flatten_graph(spec.descriptor.body.graph)
            edges.extend(rewrite_inner_edge(pe_id, e) for e in inner.edges)
    for edge in graph.edges:
        source = output_map.get((edge.source.pe, edge.source.port), edge.source)
        target = input_map.get((edge.target.pe, edge.target.port), edge.target)
        edges.append(StreamConnection(source=source, target=target, buffer_capacity=edge.buffer_capacity))

    feeds = {
        name: input_map.get((ref.pe, ref.port), ref)
        for name, ref in graph.source_feeds.items()
    }
    return WorkflowGraph(nodes=nodes, edges=tuple(edges), source_feeds=feeds)


def terminal_port_aliases(graph: WorkflowGraph) -> dict[str, str]:
    """Map flattened terminal ports back to composite-level names.

    After flattening, a composite's exposed output ``comp.out`` lives on
    an inner node. Callers that named outputs at the composite level can
    translate collected output keys through this map.
    """
    aliases: dict[str, str] = {}
    for pe_id, spec in graph.nodes.items():
        if spec.descriptor.kind != "composite":
            continue
        for outer_port, ref in spec.descriptor.body.output_bindings.items():
            aliases[f"{pe_id}/{ref.pe}.{ref.port}"] = f"{pe_id}.{outer_port}"
    return aliases
