"""Single-trace preparation transforms.

The usual ambient-noise chain: demean, detrend, taper, bandpass,
decimate, spectral whitening and one-bit normalization. All transforms
are pure and deterministic; station identity never changes and only
decimate touches dt.
"""

from __future__ import annotations

from typing import Any, Mapping

import numpy as np
from scipy import signal

from ..errors import WavepipeError, error_code
from .trace import Trace

TRANSFORM_KINDS = ("demean", "detrend", "taper", "bandpass", "decimate", "whiten", "onebit")


@error_code("BadParams")
class BadParams(WavepipeError):
    pass


@error_code("TooShort")
class TooShort(WavepipeError):
    pass


def apply_trace_transform(kind: str, params: Mapping[str, Any], trace: Trace) -> Trace:
    if kind not in TRANSFORM_KINDS:
        raise BadParams(f"unknown transform {kind!r}")
    return _APPLY[kind](dict(params or {}), trace)


def _demean(params, trace: Trace) -> Trace:
    if trace.n < 1:
        raise TooShort("demean needs at least one sample")
    return trace.with_samples(trace.samples - trace.samples.mean())


def _detrend(params, trace: Trace) -> Trace:
    if trace.n < 2:
        raise TooShort("detrend needs at least two samples")
    x = np.arange(trace.n, dtype=np.float64)
    slope, intercept = np.polyfit(x, trace.samples, 1)
    return trace.with_samples(trace.samples - (slope * x + intercept))


def _taper(params, trace: Trace) -> Trace:
    fraction = params.get("fraction", 0.05)
    if not 0.0 < fraction <= 0.5:
        raise BadParams(f"taper fraction must be in (0, 0.5], got {fraction}")
    if trace.n < 2:
        raise TooShort("taper needs at least two samples")
    width = max(1, int(round(fraction * trace.n)))
    window = np.ones(trace.n)
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(width) / width))
    window[:width] = ramp
    window[-width:] = ramp[::-1]
    return trace.with_samples(trace.samples * window)


def _bandpass(params, trace: Trace) -> Trace:
    lo, hi = params.get("lo"), params.get("hi")
    order = int(params.get("order", 4))
    nyquist = 0.5 / trace.dt
    if lo is None or hi is None or not 0.0 < lo < hi < nyquist:
        raise BadParams(f"bandpass needs 0 < lo < hi < {nyquist} Hz, got lo={lo} hi={hi}")
    sos = signal.butter(order, [lo, hi], btype="bandpass", fs=1.0 / trace.dt, output="sos")
    try:
        # two-pass (forward and reverse) application: zero phase
        filtered = signal.sosfiltfilt(sos, trace.samples)
    except ValueError as exc:
        raise TooShort(f"bandpass: {exc}") from exc
    return trace.with_samples(filtered)


def _decimate(params, trace: Trace) -> Trace:
    factor = params.get("factor")
    if not isinstance(factor, int) or factor < 2:
        raise BadParams(f"decimate factor must be an integer >= 2, got {factor}")
    try:
        out = signal.decimate(trace.samples, factor, ftype="iir", zero_phase=True)
    except ValueError as exc:
        raise TooShort(f"decimate: {exc}") from exc
    return trace.with_samples(out, dt=trace.dt * factor)


def _whiten(params, trace: Trace) -> Trace:
    bins = int(params.get("smoothBins", 11))
    if bins < 3 or bins % 2 == 0:
        raise BadParams(f"smoothBins must be odd and >= 3, got {bins}")
    if trace.n < bins:
        raise TooShort(f"whiten needs at least {bins} samples")
    spectrum = np.fft.rfft(trace.samples)
    magnitude = np.abs(spectrum)
    kernel = np.ones(bins)
    smooth = np.convolve(magnitude, kernel, mode="same") / np.convolve(
        np.ones_like(magnitude), kernel, mode="same"
    )
    floor = max(smooth.max(), 1e-300) * 1e-12
    whitened = spectrum / np.maximum(smooth, floor)
    return trace.with_samples(np.fft.irfft(whitened, n=trace.n))


def _onebit(params, trace: Trace) -> Trace:
    return trace.with_samples(np.sign(trace.samples))


_APPLY = {
    "demean": _demean,
    "detrend": _detrend,
    "taper": _taper,
    "bandpass": _bandpass,
    "decimate": _decimate,
    "whiten": _whiten,
    "onebit": _onebit,
}
