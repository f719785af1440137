"""Misfit analysis: observed versus synthetic traces.

Two canonical measures: the L2 waveform misfit 0.5 * sum((s-o)^2) * dt
over the common time support, and the cross-correlation time shift
(argmax of the normalized correlation, ties broken toward smaller
absolute lag; positive shift means the synthetic arrives late).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import WavepipeError, error_code
from .correlate import DtMismatch
from .trace import Trace


@error_code("NoOverlap")
class NoOverlap(WavepipeError):
    pass


@dataclass(frozen=True)
class MisfitReport:
    kind: str                  # "l2" | "ccShift"
    value: float               # l2 value (>= 0) or shift in seconds
    normalized_cc: float | None = None
    windows: tuple[float, ...] | None = None

    def to_document(self) -> dict:
        return {
            "kind": self.kind,
            "normalizedCC": self.normalized_cc,
            "value": self.value,
            "windows": list(self.windows) if self.windows is not None else None,
        }


def _common_support(observed: Trace, synthetic: Trace) -> tuple[np.ndarray, np.ndarray]:
    if observed.dt != synthetic.dt:
        raise DtMismatch(f"dt {observed.dt} != {synthetic.dt}")
    dt = observed.dt
    start = max(observed.start_time, synthetic.start_time)
    end = min(observed.end_time, synthetic.end_time)
    if end < start:
        raise NoOverlap("traces share no time window")
    o0 = int(round((start - observed.start_time) / dt))
    s0 = int(round((start - synthetic.start_time) / dt))
    count = int(round((end - start) / dt)) + 1
    return observed.samples[o0 : o0 + count], synthetic.samples[s0 : s0 + count]


def compute_misfit(observed: Trace, synthetic: Trace, kind: str = "l2") -> MisfitReport:
    obs, syn = _common_support(observed, synthetic)
    if kind == "l2":
        diff = syn - obs
        value = 0.5 * float(np.sum(diff * diff)) * observed.dt
        return MisfitReport(kind="l2", value=value)
    if kind == "ccShift":
        return _cc_shift(obs, syn, observed.dt)
    raise WavepipeError(f"unknown misfit kind {kind!r}")


def _cc_shift(obs: np.ndarray, syn: np.ndarray, dt: float) -> MisfitReport:
    n = obs.size
    norm = float(np.sqrt(np.sum(obs * obs) * np.sum(syn * syn)))
    if norm == 0.0:
        return MisfitReport(kind="ccShift", value=0.0, normalized_cc=0.0)
    best_lag = 0
    best_cc = -np.inf
    # scan by increasing |lag| so the first strict maximum wins ties
    for lag in sorted(range(-(n - 1), n), key=lambda l: (abs(l), l)):
        t0 = max(0, -lag)
        t1 = min(n, n - lag)
        if t1 <= t0:
            continue
        cc = float(np.dot(obs[t0:t1], syn[t0 + lag : t1 + lag])) / norm
        if cc > best_cc:
            best_cc = cc
            best_lag = lag
    return MisfitReport(kind="ccShift", value=best_lag * dt, normalized_cc=best_cc)
