"""Pairwise cross-correlation and linear stacking.

The correlation is the direct sum values[l] = sum_t a[t] * b[t+l] with
zero padding outside the overlap. Terms accumulate in ascending t, so
the result is bit-reproducible and matches any same-order reference
summation exactly. Stacking is the element-wise mean over windows; the
stacked window count is the sum of the parts.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import WavepipeError, error_code
from .trace import Trace


@error_code("DtMismatch")
class DtMismatch(WavepipeError):
    pass


@error_code("TooShort")
class CorrelationTooShort(WavepipeError):
    pass


@error_code("MixedPairs")
class MixedPairs(WavepipeError):
    pass


@error_code("MixedLagGrids")
class MixedLagGrids(WavepipeError):
    pass


@error_code("EmptyList")
class EmptyList(WavepipeError):
    pass


@dataclass(frozen=True)
class CorrelationResult:
    lags: np.ndarray     # seconds, strictly increasing, symmetric about 0
    values: np.ndarray
    pair: tuple[str, str]
    window_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lags", np.asarray(self.lags, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.lags.size != self.values.size:
            raise ValueError("lags and values must have equal length")
        if self.lags.size % 2 != 1:
            raise ValueError("lag grid must be symmetric about zero (odd length)")

    @property
    def max_lag_samples(self) -> int:
        return (self.lags.size - 1) // 2

    @property
    def dt(self) -> float:
        return float(self.lags[1] - self.lags[0]) if self.lags.size > 1 else 0.0


def ordered_dot(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Left-to-right sum of products; the order is part of the contract."""
    return float(sum(map(operator.mul, xs, ys)))


def cross_correlate(a: Trace, b: Trace, max_lag_samples: int) -> CorrelationResult:
    if a.dt != b.dt:
        raise DtMismatch(f"dt {a.dt} != {b.dt}")
    if max_lag_samples < 0:
        raise ValueError("max_lag_samples must be >= 0")
    na, nb = a.n, b.n
    if na <= max_lag_samples or nb <= max_lag_samples:
        raise CorrelationTooShort(
            f"both traces must be longer than max lag {max_lag_samples} (got {na}, {nb})"
        )
    fa = a.samples.tolist()
    fb = b.samples.tolist()
    values = np.empty(2 * max_lag_samples + 1, dtype=np.float64)
    for i, lag in enumerate(range(-max_lag_samples, max_lag_samples + 1)):
        t0 = max(0, -lag)
        t1 = min(na, nb - lag)
        values[i] = ordered_dot(fa[t0:t1], fb[t0 + lag : t1 + lag]) if t1 > t0 else 0.0
    lags = np.arange(-max_lag_samples, max_lag_samples + 1, dtype=np.float64) * a.dt
    return CorrelationResult(lags=lags, values=values, pair=(a.channel_id, b.channel_id), window_count=1)


def stack_correlations(results: Sequence[CorrelationResult]) -> CorrelationResult:
    results = list(results)
    if not results:
        raise EmptyList("nothing to stack")
    head = results[0]
    for r in results[1:]:
        if r.pair != head.pair:
            raise MixedPairs(f"cannot stack {r.pair} with {head.pair}")
        if r.lags.size != head.lags.size or not np.array_equal(r.lags, head.lags):
            raise MixedLagGrids("lag grids differ")
    acc = np.zeros_like(head.values)
    for r in results:
        acc += r.values
    return CorrelationResult(
        lags=head.lags.copy(),
        values=acc / len(results),
        pair=head.pair,
        window_count=sum(r.window_count for r in results),
    )


def correlation_to_payload(result: CorrelationResult) -> dict:
    return {
        "kind": "correlation",
        "lags": result.lags,
        "pair": list(result.pair),
        "values": result.values,
        "windowCount": result.window_count,
    }


def correlation_from_payload(payload: Mapping[str, Any]) -> CorrelationResult:
    return CorrelationResult(
        lags=np.asarray(payload["lags"], dtype=np.float64),
        values=np.asarray(payload["values"], dtype=np.float64),
        pair=(payload["pair"][0], payload["pair"][1]),
        window_count=int(payload["windowCount"]),
    )
