"""Cross-correlation against the direct-summation oracle, exactly."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavepipe.seismo import (
    CorrelationResult,
    DtMismatch,
    EmptyList,
    MixedPairs,
    Trace,
    cross_correlate,
    stack_correlations,
)
from wavepipe.seismo.correlate import CorrelationTooShort


def trace_of(values, dt=1.0, sta="S1", cha="Z"):
    return Trace(samples=np.asarray(values, dtype=np.float64), dt=dt, net="XX", sta=sta, cha=cha)


def oracle_correlation(a: np.ndarray, b: np.ndarray, max_lag: int) -> np.ndarray:
    """Independent direct sum, plain loops, ascending t."""
    na, nb = len(a), len(b)
    out = np.empty(2 * max_lag + 1)
    for i, lag in enumerate(range(-max_lag, max_lag + 1)):
        acc = 0.0
        for t in range(max(0, -lag), min(na, nb - lag)):
            acc += a[t] * b[t + lag]
        out[i] = acc
    return out


class TestCrossCorrelate:
    def test_unit_impulses(self):
        a = trace_of([0, 1, 0, 0])
        b = trace_of([0, 0, 1, 0], sta="S2")
        result = cross_correlate(a, b, 3)
        expected = oracle_correlation(a.samples, b.samples, 3)
        assert result.values.tolist() == expected.tolist()
        nonzero = np.nonzero(result.values)[0]
        assert nonzero.tolist() == [4]  # lag +1 at index maxLag+1
        assert result.lags[4] == pytest.approx(+1.0 * a.dt)
        assert result.values[4] == 1.0

    def test_autocorrelation_of_123(self):
        t = trace_of([1, 2, 3])
        result = cross_correlate(t, t, 1)
        assert result.values.tolist() == [8.0, 14.0, 8.0]
        assert result.lags.tolist() == [-1.0, 0.0, 1.0]

    def test_zeros_give_zeros(self):
        a = trace_of([1.0, 2.0, 3.0, 4.0])
        b = trace_of([0.0, 0.0, 0.0, 0.0], sta="S2")
        assert np.all(cross_correlate(a, b, 2).values == 0.0)

    def test_dt_mismatch(self):
        with pytest.raises(DtMismatch):
            cross_correlate(trace_of([1, 2, 3], dt=1.0), trace_of([1, 2, 3], dt=0.5), 1)

    def test_too_short(self):
        with pytest.raises(CorrelationTooShort):
            cross_correlate(trace_of([1, 2]), trace_of([1, 2]), 2)

    def test_bit_equality_with_oracle_on_random_signals(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            na = int(rng.integers(8, 200))
            nb = int(rng.integers(8, 200))
            max_lag = int(rng.integers(0, min(na, nb)))
            a = rng.standard_normal(na)
            b = rng.standard_normal(nb)
            got = cross_correlate(trace_of(a), trace_of(b, sta="S2"), max_lag).values
            want = oracle_correlation(a, b, max_lag)
            assert got.tobytes() == want.tobytes()


class TestSymmetryProperties:
    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.floats(-100, 100, allow_nan=False), min_size=5, max_size=40),
        st.lists(st.floats(-100, 100, allow_nan=False), min_size=5, max_size=40),
        st.integers(0, 4),
    )
    def test_reversal_symmetry_exact(self, xs, ys, max_lag):
        a = trace_of(xs)
        b = trace_of(ys, sta="S2")
        ab = cross_correlate(a, b, max_lag).values
        ba = cross_correlate(b, a, max_lag).values
        assert ab.tobytes() == ba[::-1].tobytes()

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=60), st.integers(1, 3))
    def test_autocorrelation_peaks_at_zero_lag(self, xs, max_lag):
        t = trace_of(xs)
        if t.n <= max_lag:
            return
        values = cross_correlate(t, t, max_lag).values
        assert values[max_lag] == max(values)


class TestStacking:
    def corr(self, values, count=1):
        lags = np.arange(-2, 3, dtype=np.float64)
        return CorrelationResult(lags=lags, values=np.asarray(values, dtype=np.float64),
                                 pair=("XX.S1.Z", "XX.S2.Z"), window_count=count)

    def test_identical_stack_keeps_values_doubles_count(self):
        r = self.corr([1.0, 2.0, 3.0, 2.0, 1.0])
        out = stack_correlations([r, r])
        assert out.values.tolist() == r.values.tolist()
        assert out.window_count == 2

    def test_opposite_windows_cancel(self):
        r = self.corr([1.0, -2.0, 3.0, -2.0, 1.0])
        neg = self.corr((-r.values).tolist())
        assert np.all(stack_correlations([r, neg]).values == 0.0)

    def test_errors(self):
        with pytest.raises(EmptyList):
            stack_correlations([])
        other = CorrelationResult(
            lags=np.arange(-2, 3, dtype=np.float64),
            values=np.zeros(5),
            pair=("XX.S1.Z", "XX.S3.Z"),
        )
        with pytest.raises(MixedPairs):
            stack_correlations([self.corr([0, 0, 0, 0, 0]), other])

    def test_stacking_raises_snr(self):
        # oracle: compute both SNRs from the same seeded noise realizations
        rng = np.random.default_rng(42)
        n, max_lag, true_lag = 400, 50, 7
        windows = []
        for _ in range(10):
            common = rng.standard_normal(n + true_lag)
            a = common[:n] + 0.7 * rng.standard_normal(n)
            b = common[true_lag : n + true_lag] + 0.7 * rng.standard_normal(n)
            windows.append(cross_correlate(trace_of(a), trace_of(b, sta="S2"), max_lag))

        def snr(result):
            # b[t] = common[t + true_lag], so values[l] peaks at l = -true_lag
            peak_idx = max_lag - true_lag
            noise = np.delete(result.values, peak_idx)
            return abs(result.values[peak_idx]) / np.std(noise)

        stacked = stack_correlations(windows)
        assert snr(stacked) > 2.0 * snr(windows[0])
