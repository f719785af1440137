"""Seismology domain: traces, transforms, correlation, a 1D forward
solver, misfit analysis and bulk ingest."""

from .trace import (
    EventRecord,
    StationMeta,
    Trace,
    read_trace,
    trace_from_payload,
    trace_to_payload,
    write_trace,
)
from .transforms import BadParams, TooShort, apply_trace_transform
from .correlate import (
    CorrelationResult,
    DtMismatch,
    EmptyList,
    MixedLagGrids,
    MixedPairs,
    cross_correlate,
    stack_correlations,
    correlation_from_payload,
    correlation_to_payload,
)
from .solver import (
    CFLViolation,
    OutOfDomain,
    UnresolvedWavelength,
    VelocityModel1D,
    discrete_energy_series,
    first_arrival_time,
    forward_simulate_1d,
    ricker,
)
from .misfit import MisfitReport, NoOverlap, compute_misfit
from .pairs import TooFewChannels, all_pairs_feeds, build_all_pairs_graph, default_prep_steps
from .ingest import IngestReport, PathUnreadable, ingest_directory
from . import elements  # noqa: F401  (registers seismo catalog elements)

__all__ = [
    "BadParams",
    "CFLViolation",
    "CorrelationResult",
    "DtMismatch",
    "EmptyList",
    "EventRecord",
    "IngestReport",
    "MisfitReport",
    "MixedLagGrids",
    "MixedPairs",
    "NoOverlap",
    "OutOfDomain",
    "PathUnreadable",
    "StationMeta",
    "TooFewChannels",
    "TooShort",
    "Trace",
    "UnresolvedWavelength",
    "VelocityModel1D",
    "all_pairs_feeds",
    "apply_trace_transform",
    "build_all_pairs_graph",
    "compute_misfit",
    "correlation_from_payload",
    "correlation_to_payload",
    "cross_correlate",
    "default_prep_steps",
    "discrete_energy_series",
    "first_arrival_time",
    "forward_simulate_1d",
    "ingest_directory",
    "read_trace",
    "ricker",
    "stack_correlations",
    "trace_from_payload",
    "trace_to_payload",
    "write_trace",
]
