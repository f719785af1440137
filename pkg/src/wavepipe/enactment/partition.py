"""Graph partitioning: cluster nodes to cut as few connections as
possible while respecting per-worker load limits.

Deterministic greedy edge contraction seeds the plan: repeatedly merge
the two clusters joined by the heaviest remaining connection bundle
whose combined weight still fits one worker, then place clusters on
workers largest-first. A move-based refinement pass (single-node moves
with best-prefix backtracking, so short uphill sequences can escape
contraction's local minima) polishes the assignment. Ties always break
lexicographically, so identical inputs give identical plans. The result
is guarded against the naive round-robin assignment: whichever cuts
fewer connections wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from ..dataflow.graph import WorkflowGraph
from ..errors import WavepipeError, error_code


@error_code("InfeasibleLoad")
class InfeasibleLoad(WavepipeError):
    pass


@error_code("EmptyGraph")
class EmptyGraph(WavepipeError):
    pass


@dataclass(frozen=True)
class ExecutionPlan:
    partition_of: Mapping[str, int]
    worker_count: int
    cut_edges: int
    load_of: Mapping[int, float]

    def to_document(self) -> dict:
        return {
            "cutEdges": self.cut_edges,
            "loadOf": {str(w): load for w, load in self.load_of.items()},
            "partitionOf": dict(self.partition_of),
            "workerCount": self.worker_count,
        }


def count_cut_edges(graph: WorkflowGraph, partition_of: Mapping[str, int]) -> int:
    return sum(1 for e in graph.edges if partition_of[e.source.pe] != partition_of[e.target.pe])


def _loads(partition_of: Mapping[str, int], weights: Mapping[str, float], worker_count: int) -> dict[int, float]:
    loads = {w: 0.0 for w in range(worker_count)}
    for pe, w in partition_of.items():
        loads[w] += weights[pe]
    return loads


def _make_plan(graph: WorkflowGraph, partition_of: dict[str, int], weights: Mapping[str, float], worker_count: int) -> ExecutionPlan:
    return ExecutionPlan(
        partition_of=dict(partition_of),
        worker_count=worker_count,
        cut_edges=count_cut_edges(graph, partition_of),
        load_of=_loads(partition_of, weights, worker_count),
    )


def round_robin_plan(graph: WorkflowGraph, worker_count: int, node_weights: Mapping[str, float] | None = None) -> ExecutionPlan:
    """Naive baseline: i-th node (sorted by id) on worker i mod workers."""
    weights = _node_weights(graph, node_weights)
    partition_of = {pe: i % worker_count for i, pe in enumerate(graph.node_ids())}
    return _make_plan(graph, partition_of, weights, worker_count)


def _node_weights(graph: WorkflowGraph, node_weights: Mapping[str, float] | None) -> dict[str, float]:
    weights = {pe: 1.0 for pe in graph.nodes}
    if node_weights:
        for pe, w in node_weights.items():
            if pe in weights:
                weights[pe] = float(w)
    return weights


def _first_fit_decreasing(
    clusters: list[tuple[str, float, frozenset[str]]],
    worker_count: int,
    max_load: float,
) -> dict[str, int] | None:
    """Place clusters largest-first onto the least-loaded fitting worker."""
    loads = [0.0] * worker_count
    assignment: dict[str, int] = {}
    for rep, weight, members in sorted(clusters, key=lambda c: (-c[1], c[0])):
        candidates = [w for w in range(worker_count) if loads[w] + weight <= max_load + 1e-9]
        if not candidates:
            return None
        best = min(candidates, key=lambda w: (loads[w], w))
        loads[best] += weight
        for pe in members:
            assignment[pe] = best
    return assignment


def _refine_assignment(
    graph: WorkflowGraph,
    assignment: dict[str, int],
    weights: Mapping[str, float],
    worker_count: int,
    max_load: float,
    max_passes: int = 8,
) -> dict[str, int]:
    """Deterministic move/swap refinement.

    Each pass touches every node at most once, always applying the
    highest-gain feasible operation: a single-node move or a cross-worker
    pair swap (swaps matter when workers sit at the load limit, where no
    single move is feasible). Ties break lexicographically. Negative-gain
    prefixes are allowed and the pass reverts to the best state it saw,
    so short uphill sequences can escape local minima. Skipped for very
    large graphs, where contraction alone is the scalable path.
    """
    if len(graph.nodes) > 200:
        return assignment
    degree: dict[tuple[str, str], int] = {}
    for edge in graph.edges:
        a, b = edge.source.pe, edge.target.pe
        if a == b:
            continue
        degree[(a, b)] = degree.get((a, b), 0) + 1
        degree[(b, a)] = degree.get((b, a), 0) + 1
    neighbours: dict[str, list[str]] = {pe: [] for pe in graph.nodes}
    for (a, b), _count in degree.items():
        neighbours[a].append(b)
    neighbours = {pe: sorted(set(ns)) for pe, ns in neighbours.items()}

    current = dict(assignment)
    loads = {w: 0.0 for w in range(worker_count)}
    for pe, w in current.items():
        loads[w] += weights[pe]

    def gain(pe: str, target: int) -> int:
        here = current[pe]
        g = 0
        for other in neighbours[pe]:
            links = degree[(pe, other)]
            if current[other] == here:
                g -= links
            if current[other] == target:
                g += links
        return g

    best_cut = count_cut_edges(graph, current)
    for _pass in range(max_passes):
        pass_start_cut = best_cut
        snapshot_best = dict(current)
        snapshot_loads = dict(loads)
        running_cut = best_cut
        unlocked = set(graph.nodes)
        while unlocked:
            candidates: list[tuple[int, int, str, str | None, int]] = []
            ordered = sorted(unlocked)
            for pe in ordered:
                for target in range(worker_count):
                    if target == current[pe]:
                        continue
                    if loads[target] + weights[pe] > max_load + 1e-9:
                        continue
                    candidates.append((-gain(pe, target), 0, pe, None, target))
            for i, pe_a in enumerate(ordered):
                for pe_b in ordered[i + 1 :]:
                    wa, wb = current[pe_a], current[pe_b]
                    if wa == wb:
                        continue
                    if loads[wa] - weights[pe_a] + weights[pe_b] > max_load + 1e-9:
                        continue
                    if loads[wb] - weights[pe_b] + weights[pe_a] > max_load + 1e-9:
                        continue
                    shared = degree.get((pe_a, pe_b), 0)
                    swap_gain = gain(pe_a, wb) + gain(pe_b, wa) - 2 * shared
                    candidates.append((-swap_gain, 1, pe_a, pe_b, wb))
            if not candidates:
                break
            candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3] or ""))
            neg_gain, kind, pe_a, pe_b, target = candidates[0]
            if kind == 0:
                loads[current[pe_a]] -= weights[pe_a]
                loads[target] += weights[pe_a]
                current[pe_a] = target
                unlocked.discard(pe_a)
            else:
                wa, wb = current[pe_a], current[pe_b]
                loads[wa] += weights[pe_b] - weights[pe_a]
                loads[wb] += weights[pe_a] - weights[pe_b]
                current[pe_a], current[pe_b] = wb, wa
                unlocked.discard(pe_a)
                unlocked.discard(pe_b)
            running_cut += neg_gain
            if running_cut < best_cut:
                best_cut = running_cut
                snapshot_best = dict(current)
                snapshot_loads = dict(loads)
        current = dict(snapshot_best)
        loads = dict(snapshot_loads)
        if best_cut >= pass_start_cut:
            break
    return current


def partition_graph(
    graph: WorkflowGraph,
    worker_count: int,
    node_weights: Mapping[str, float] | None = None,
    max_load_per_worker: float | None = None,
) -> ExecutionPlan:
    """Plan a placement of graph nodes onto ``worker_count`` workers.

    Default node weight is 1; default load limit spreads total weight
    evenly (ceil(total / workers), never below the heaviest node).
    """
    if not graph.nodes:
        raise EmptyGraph("cannot partition an empty graph")
    if worker_count < 1:
        raise InfeasibleLoad(f"worker count must be >= 1, got {worker_count}")

    weights = _node_weights(graph, node_weights)
    total = sum(weights.values())
    heaviest = max(weights.values())
    if max_load_per_worker is None:
        max_load_per_worker = max(float(math.ceil(total / worker_count)), heaviest)
    if heaviest > max_load_per_worker + 1e-9:
        raise InfeasibleLoad(f"node weight {heaviest} exceeds per-worker limit {max_load_per_worker}")
    if total > worker_count * max_load_per_worker + 1e-9:
        raise InfeasibleLoad(
            f"total weight {total} exceeds capacity {worker_count} x {max_load_per_worker}"
        )

    if worker_count == 1:
        partition_of = {pe: 0 for pe in graph.nodes}
        return _make_plan(graph, partition_of, weights, worker_count)

    # Greedy contraction state: representative id -> (weight, members).
    rep_of = {pe: pe for pe in graph.nodes}
    cluster_weight = {pe: weights[pe] for pe in graph.nodes}
    members: dict[str, set[str]] = {pe: {pe} for pe in graph.nodes}

    def find(pe: str) -> str:
        while rep_of[pe] != pe:
            rep_of[pe] = rep_of[rep_of[pe]]
            pe = rep_of[pe]
        return pe

    while True:
        bundles: dict[tuple[str, str], float] = {}
        for edge in graph.edges:
            a, b = find(edge.source.pe), find(edge.target.pe)
            if a == b:
                continue
            key = (a, b) if a < b else (b, a)
            bundles[key] = bundles.get(key, 0.0) + 1.0
        candidates = [
            (w, key)
            for key, w in bundles.items()
            if cluster_weight[key[0]] + cluster_weight[key[1]] <= max_load_per_worker + 1e-9
        ]
        if not candidates:
            break
        # Heaviest bundle first, smallest (a, b) pair on ties.
        candidates.sort(key=lambda c: (-c[0], c[1]))
        _, (a, b) = candidates[0]
        keep, gone = (a, b) if a < b else (b, a)
        rep_of[gone] = keep
        cluster_weight[keep] += cluster_weight[gone]
        members[keep] |= members[gone]
        del cluster_weight[gone]
        del members[gone]

    clusters = [(rep, cluster_weight[rep], frozenset(members[rep])) for rep in sorted(cluster_weight)]
    assignment = _first_fit_decreasing(clusters, worker_count, max_load_per_worker)
    if assignment is None:
        # Clusters too chunky to pack; retry with unmerged nodes.
        singles = [(pe, weights[pe], frozenset({pe})) for pe in sorted(graph.nodes)]
        assignment = _first_fit_decreasing(singles, worker_count, max_load_per_worker)
        if assignment is None:
            raise InfeasibleLoad("no feasible placement under the per-worker limit")

    assignment = _refine_assignment(graph, assignment, weights, worker_count, max_load_per_worker)
    greedy = _make_plan(graph, assignment, weights, worker_count)

    baseline = round_robin_plan(graph, worker_count, node_weights)
    baseline_feasible = all(load <= max_load_per_worker + 1e-9 for load in baseline.load_of.values())
    if baseline_feasible and baseline.cut_edges < greedy.cut_edges:
        return baseline
    return greedy
