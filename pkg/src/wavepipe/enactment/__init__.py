"""Execution planning and enactment backends."""

from .partition import ExecutionPlan, InfeasibleLoad, EmptyGraph, partition_graph, round_robin_plan
from .events import (
    AlreadyTerminal,
    RunEvent,
    RunRecord,
    RunStore,
    UnknownRun,
    PENDING,
    RUNNING,
    COMPLETED,
    FAILED,
    CANCELLED,
    TERMINAL_STATES,
)
from .engine import Engine, PEFailure, RunOptions

__all__ = [
    "AlreadyTerminal",
    "CANCELLED",
    "COMPLETED",
    "EmptyGraph",
    "Engine",
    "ExecutionPlan",
    "FAILED",
    "InfeasibleLoad",
    "PEFailure",
    "PENDING",
    "RUNNING",
    "RunEvent",
    "RunOptions",
    "RunRecord",
    "RunStore",
    "TERMINAL_STATES",
    "UnknownRun",
    "partition_graph",
    "round_robin_plan",
]
