"""Workflow graphs: processing elements, stream connections, validation."""

from .units import BlobRef, DataUnit, payload_kind
from .descriptors import (
    Context,
    Element,
    ParamSpec,
    PEDescriptor,
    PortRef,
    atomic,
    map_element,
    register_element,
    resolve_body,
)
from .graph import (
    DEFAULT_BUFFER_CAPACITY,
    GraphBuildError,
    NodeSpec,
    StreamConnection,
    WorkflowGraph,
    build_graph,
    connect,
)
from .validation import (
    CycleDetected,
    DanglingPort,
    ParameterMismatch,
    Issue,
    ValidationReport,
    find_cycle,
    topological_order,
    validate_graph,
)
from .composite import (
    CompositeBody,
    InnerGraphInvalid,
    PortNotExposed,
    flatten_graph,
    wrap_subgraph,
)
from .serialize import (
    GRAPH_FILE_SUFFIX,
    graph_document,
    graph_from_document,
    graph_ref,
    load_graph_file,
    write_graph_file,
)
from . import catalog  # noqa: F401  (registers built-in elements)

__all__ = [
    "BlobRef",
    "CompositeBody",
    "Context",
    "CycleDetected",
    "DanglingPort",
    "DataUnit",
    "DEFAULT_BUFFER_CAPACITY",
    "Element",
    "GraphBuildError",
    "GRAPH_FILE_SUFFIX",
    "InnerGraphInvalid",
    "Issue",
    "NodeSpec",
    "ParamSpec",
    "ParameterMismatch",
    "PEDescriptor",
    "PortNotExposed",
    "PortRef",
    "StreamConnection",
    "ValidationReport",
    "WorkflowGraph",
    "atomic",
    "build_graph",
    "connect",
    "find_cycle",
    "flatten_graph",
    "graph_document",
    "graph_from_document",
    "graph_ref",
    "load_graph_file",
    "map_element",
    "payload_kind",
    "register_element",
    "resolve_body",
    "topological_order",
    "validate_graph",
    "wrap_subgraph",
    "write_graph_file",
]
