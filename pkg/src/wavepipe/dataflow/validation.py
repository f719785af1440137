"""Graph validation and ordering.

The report is a pure, deterministic function of the graph: same graph,
same issues, same order. Errors are cycles, dangling ports and schema
violations; unconnected inputs and unconsumed outputs are warnings.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..errors import WavepipeError, error_code
from .descriptors import INPUT, OUTPUT, SchemaError
from .graph import GraphBuildError, WorkflowGraph


@error_code("DanglingPort")
class DanglingPort(WavepipeError):
    pass


@error_code("CycleDetected")
class CycleDetected(WavepipeError):
    pass


@error_code("ParameterMismatch")
class ParameterMismatch(WavepipeError):
    pass


@dataclass(frozen=True, slots=True)
class Issue:
    severity: str  # "error" | "warning"
    code: str
    message: str
    location: str = ""


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...]

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]


def _port_exists(graph: WorkflowGraph, pe: str, port: str, direction: str) -> bool:
    spec = graph.nodes.get(pe)
    if spec is None:
        return False
    ports = spec.descriptor.input_ports if direction == INPUT else spec.descriptor.output_ports
    return port in ports


def validate_graph(graph: WorkflowGraph) -> ValidationReport:
    issues: list[Issue] = []

    for i, edge in enumerate(graph.edges):
        where = f"edges[{i}]"
        if not _port_exists(graph, edge.source.pe, edge.source.port, OUTPUT):
            issues.append(Issue("error", "DANGLING_PORT", f"unknown output port {edge.source}", where))
        if not _port_exists(graph, edge.target.pe, edge.target.port, INPUT):
            issues.append(Issue("error", "DANGLING_PORT", f"unknown input port {edge.target}", where))
        if edge.buffer_capacity <= 0:
            issues.append(Issue("error", "BAD_CAPACITY", f"buffer capacity must be positive, got {edge.buffer_capacity}", where))

    seen_edges = set()
    for i, edge in enumerate(graph.edges):
        key = (edge.source.pe, edge.source.port, edge.target.pe, edge.target.port)
        if key in seen_edges:
            issues.append(Issue("warning", "DUPLICATE_CONNECTION", f"duplicate connection {edge.source} -> {edge.target}", f"edges[{i}]"))
        seen_edges.add(key)

    for name in sorted(graph.source_feeds):
        ref = graph.source_feeds[name]
        if ref.direction != INPUT or not _port_exists(graph, ref.pe, ref.port, INPUT):
            issues.append(Issue("error", "DANGLING_PORT", f"feed {name!r} targets unknown input port {ref}", f"sourceFeeds[{name}]"))

    for pe in graph.node_ids():
        spec = graph.nodes[pe]
        try:
            spec.descriptor.check_parameters(spec.parameters)
        except SchemaError as exc:
            issues.append(Issue("error", "PARAMETER_MISMATCH", str(exc), pe))
        if spec.descriptor.kind == "composite":
            inner_report = validate_graph(spec.descriptor.body.graph)
            for issue in inner_report.errors():
                issues.append(Issue("error", "INNER_GRAPH_INVALID", f"{issue.code}: {issue.message}", f"{pe}/{issue.location}"))

    # Cycle check only when edges are structurally sound.
    if not any(i.code == "DANGLING_PORT" for i in issues):
        cycle = find_cycle(graph)
        if cycle is not None:
            issues.append(Issue("error", "CYCLE_DETECTED", "cycle: " + " -> ".join(cycle + [cycle[0]]), ",".join(cycle)))

    for ref in graph.unconnected_input_ports():
        issues.append(Issue("warning", "UNCONNECTED_INPUT", f"input {ref} has no connection or feed", str(ref)))
    for ref in graph.unconnected_output_ports():
        issues.append(Issue("warning", "UNCONSUMED_OUTPUT", f"output {ref} is never consumed", str(ref)))

    return ValidationReport(ok=not any(i.severity == "error" for i in issues), issues=tuple(issues))


def raise_on_errors(report: ValidationReport) -> None:
    for issue in report.errors():
        if issue.code == "DANGLING_PORT":
            raise DanglingPort(issue.message, report=report)
        if issue.code == "PARAMETER_MISMATCH":
            raise ParameterMismatch(issue.message, report=report)
        if issue.code in ("CYCLE_DETECTED",):
            raise CycleDetected(issue.message, report=report)
    if report.errors():
        first = report.errors()[0]
        raise GraphBuildError(f"{first.code}: {first.message}", report=report)


def _adjacency(graph: WorkflowGraph) -> dict[str, list[str]]:
    adj: dict[str, list[str]] = {pe: [] for pe in graph.nodes}
    for edge in graph.edges:
        if edge.source.pe in adj and edge.target.pe in adj:
            adj[edge.source.pe].append(edge.target.pe)
    return {pe: sorted(set(next_)) for pe, next_ in adj.items()}


def find_cycle(graph: WorkflowGraph) -> list[str] | None:
    """Return the node ids of one cycle, or None. Deterministic."""
    adj = _adjacency(graph)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {pe: WHITE for pe in adj}
    for root in sorted(adj):
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        path: list[str] = []
        color[root] = GREY
        path.append(root)
        while stack:
            node, idx = stack[-1]
            neighbours = adj[node]
            if idx < len(neighbours):
                stack[-1] = (node, idx + 1)
                nxt = neighbours[idx]
                if color[nxt] == GREY:
                    at = path.index(nxt)
                    return path[at:]
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    path.append(nxt)
                    stack.append((nxt, 0))
            else:
                stack.pop()
                path.pop()
                color[node] = BLACK
    return None


def topological_order(graph: WorkflowGraph) -> list[str]:
    """Kahn's algorithm; ties broken by lexicographic instance id."""
    indegree = {pe: 0 for pe in graph.nodes}
    adj = _adjacency(graph)
    for pe, nbrs in adj.items():
        for nxt in nbrs:
            indegree[nxt] += 1
    ready = [pe for pe, deg in sorted(indegree.items()) if deg == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        pe = heapq.heappop(ready)
        order.append(pe)
        for nxt in adj[pe]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(graph.nodes):
        cycle = find_cycle(graph) or []
        raise CycleDetected("cycle: " + " -> ".join(cycle + cycle[:1]))
    return order
