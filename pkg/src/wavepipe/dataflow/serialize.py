"""Graph documents: the on-disk form of a workflow graph.

One canonical JSON document per graph (nodes, edges, feeds,
parameters), file suffix ``.wfg.json``. Canonical bytes round-trip
exactly: load followed by dump reproduces the canonicalized input.
Atomic bodies serialize as catalog names; in-process callables have no
document form and only contribute to the structural content hash.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

from ..canonical import canonical_bytes, content_digest, from_canonical
from ..errors import WavepipeError, error_code
from .composite import CompositeBody
from .descriptors import INPUT, OUTPUT, ParamSpec, PEDescriptor, PortRef
from .graph import NodeSpec, StreamConnection, WorkflowGraph, build_graph

GRAPH_FILE_SUFFIX = ".wfg.json"


@error_code("UnserializableGraph")
class UnserializableGraph(WavepipeError):
    pass


def _schema_document(schema: Mapping[str, ParamSpec]) -> dict:
    return {
        name: {"kind": spec.kind, "required": spec.required, "default": spec.default}
        for name, spec in schema.items()
    }


def _schema_from_document(doc: Mapping[str, Any]) -> dict[str, ParamSpec]:
    return {
        name: ParamSpec(kind=entry["kind"], required=entry["required"], default=entry["default"])
        for name, entry in doc.items()
    }


def _body_document(descriptor: PEDescriptor, strict: bool) -> Any:
    if descriptor.kind == "composite":
        body: CompositeBody = descriptor.body
        return {
            "composite": {
                "graph": graph_document(body.graph, strict=strict),
                "inputBindings": {k: [r.pe, r.port] for k, r in body.input_bindings.items()},
                "outputBindings": {k: [r.pe, r.port] for k, r in body.output_bindings.items()},
            }
        }
    if isinstance(descriptor.body, str):
        return descriptor.body
    if strict:
        raise UnserializableGraph(
            f"element {descriptor.name!r} has an in-process body; register it in the catalog to serialize"
        )
    qualname = getattr(descriptor.body, "__qualname__", repr(descriptor.body))
    return f"callable:{qualname}"


def graph_document(graph: WorkflowGraph, strict: bool = True) -> dict:
    nodes = {}
    for pe_id, spec in graph.nodes.items():
        d = spec.descriptor
        nodes[pe_id] = {
            "element": _body_document(d, strict),
            "inputs": list(d.input_ports),
            "name": d.name,
            "outputs": list(d.output_ports),
            "parameters": dict(spec.parameters),
            "schema": _schema_document(d.parameter_schema),
            "stateful": d.stateful,
            "version": d.version,
        }
    return {
        "edges": [
            {
                "capacity": e.buffer_capacity,
                "from": [e.source.pe, e.source.port],
                "to": [e.target.pe, e.target.port],
            }
            for e in graph.edges
        ],
        "nodes": nodes,
        "sourceFeeds": {name: [ref.pe, ref.port] for name, ref in graph.source_feeds.items()},
    }


def _descriptor_from_document(doc: Mapping[str, Any]) -> PEDescriptor:
    element = doc["element"]
    if isinstance(element, Mapping) and "composite" in element:
        comp = element["composite"]
        body = CompositeBody(
            graph=graph_from_document(comp["graph"]),
            input_bindings={k: PortRef(v[0], v[1], INPUT) for k, v in comp["inputBindings"].items()},
            output_bindings={k: PortRef(v[0], v[1], OUTPUT) for k, v in comp["outputBindings"].items()},
        )
        kind = "composite"
    else:
        body = element
        kind = "atomic"
    return PEDescriptor(
        name=doc["name"],
        version=doc["version"],
        input_ports=tuple(doc["inputs"]),
        output_ports=tuple(doc["outputs"]),
        stateful=doc["stateful"],
        parameter_schema=_schema_from_document(doc["schema"]),
        kind=kind,
        body=body,
    )


def descriptor_document(descriptor: PEDescriptor, strict: bool = True) -> dict:
    return {
        "element": _body_document(descriptor, strict),
        "inputs": list(descriptor.input_ports),
        "name": descriptor.name,
        "outputs": list(descriptor.output_ports),
        "schema": _schema_document(descriptor.parameter_schema),
        "stateful": descriptor.stateful,
        "version": descriptor.version,
    }


def descriptor_from_document(doc: Mapping[str, Any]) -> PEDescriptor:
    full = dict(doc)
    full.setdefault("parameters", {})
    return _descriptor_from_document(full)


def graph_from_document(doc: Mapping[str, Any]) -> WorkflowGraph:
    nodes = {
        pe_id: NodeSpec(descriptor=_descriptor_from_document(entry), parameters=dict(entry["parameters"]))
        for pe_id, entry in doc["nodes"].items()
    }
    edges = [
        StreamConnection(
            source=PortRef(e["from"][0], e["from"][1], OUTPUT),
            target=PortRef(e["to"][0], e["to"][1], INPUT),
            buffer_capacity=e["capacity"],
        )
        for e in doc["edges"]
    ]
    feeds = {name: PortRef(v[0], v[1], INPUT) for name, v in doc["sourceFeeds"].items()}
    return build_graph(nodes, edges, feeds)


def graph_ref(graph: WorkflowGraph) -> str:
    """Content hash of the graph's canonical (structural) document."""
    return content_digest(canonical_bytes(graph_document(graph, strict=False)))


def write_graph_file(graph: WorkflowGraph, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(canonical_bytes(graph_document(graph)))
    return path


def load_graph_file(path: str | Path) -> WorkflowGraph:
    return graph_from_document(from_canonical(Path(path).read_bytes()))
