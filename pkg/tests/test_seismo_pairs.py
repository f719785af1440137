"""All-pairs correlation graphs and bulk ingest."""

from __future__ import annotations

import numpy as np
import pytest

from wavepipe.blobstore import BlobStore
from wavepipe.clock import ManualClock
from wavepipe.enactment import Engine, RunOptions
from wavepipe.provenance import ProvenanceStore
from wavepipe.seismo import (
    Trace,
    TooFewChannels,
    all_pairs_feeds,
    apply_trace_transform,
    build_all_pairs_graph,
    correlation_from_payload,
    cross_correlate,
    default_prep_steps,
    ingest_directory,
    stack_correlations,
    write_trace,
)
from wavepipe.seismo.pairs import correlation_node_count
from wavepipe.seismo.trace import Trace as TraceType


def synthetic_channels(n, samples_per_channel=600, dt=0.01, seed=123):
    rng = np.random.default_rng(seed)
    traces = []
    for i in range(n):
        data = rng.standard_normal(samples_per_channel)
        traces.append(Trace(samples=data, dt=dt, net="NN", sta=f"S{i:02d}", cha="Z"))
    return traces


class TestGraphShape:
    def test_pair_count_n4(self):
        g = build_all_pairs_graph(4, max_lag_samples=16, window_seconds=2.0)
        assert correlation_node_count(g) == 6

    def test_pair_count_n1000_builds(self):
        g = build_all_pairs_graph(1000, max_lag_samples=16, window_seconds=2.0)
        assert correlation_node_count(g) == 499_500

    def test_too_few_channels(self):
        with pytest.raises(TooFewChannels):
            build_all_pairs_graph(1, max_lag_samples=4, window_seconds=1.0)


class TestExecutionMatchesStraightLine:
    def test_n4_differential(self):
        n, max_lag, window_seconds = 4, 20, 2.0
        traces = synthetic_channels(n)
        steps = default_prep_steps()
        graph = build_all_pairs_graph(n, max_lag, window_seconds, prep_steps=steps)
        engine = Engine()
        record = engine.execute(graph, input_feeds=all_pairs_feeds(traces))
        assert record.status == "completed"
        outputs = engine.output_payloads(record.run_id)

        # oracle: loop the kernels directly over the same windows
        def prep(trace):
            for step in steps:
                trace = apply_trace_transform(step["kind"], step["params"], trace)
            return trace

        per_window = int(round(window_seconds / traces[0].dt))
        windows = []
        for t in traces:
            count = t.n // per_window
            windows.append(
                [prep(t.with_samples(t.samples[w * per_window : (w + 1) * per_window])) for w in range(count)]
            )
        for i in range(n):
            for j in range(i + 1, n):
                expected = stack_correlations(
                    [cross_correlate(a, b, max_lag) for a, b in zip(windows[i], windows[j])]
                )
                got = correlation_from_payload(outputs[f"stack{i:03d}_{j:03d}.out"][0])
                assert got.values.tobytes() == expected.values.tobytes()
                assert got.window_count == expected.window_count

    def test_provenance_counts_pairs_times_windows(self):
        n, windows = 4, 3
        traces = synthetic_channels(n, samples_per_channel=900, dt=0.01)
        graph = build_all_pairs_graph(n, 16, 3.0)  # 900 samples * 0.01 s = 9 s -> 3 windows
        store = ProvenanceStore()
        engine = Engine(prov_store=store)
        record = engine.execute(graph, input_feeds=all_pairs_feeds(traces), options=RunOptions(provenance_on=True))
        assert record.status == "completed"
        acts = store.activities_of_run(record.run_id)
        corr_acts = [a for a in acts if a.pe_name == "seismo.correlate"]
        assert len(corr_acts) == (n * (n - 1) // 2) * windows
        stacked = [a for a in acts if a.pe_name == "seismo.stack"]
        assert len(stacked) == n * (n - 1) // 2


class TestIngest:
    def make_files(self, tmp_path, n_valid=5):
        traces = synthetic_channels(n_valid, samples_per_channel=100)
        for i, t in enumerate(traces):
            write_trace(t, tmp_path / f"t{i}.trc")
        return traces

    def test_valid_plus_truncated(self, tmp_path):
        self.make_files(tmp_path, 5)
        whole = (tmp_path / "t0.trc").read_bytes()
        (tmp_path / "broken.trc").write_bytes(whole[: len(whole) // 2])
        store = ProvenanceStore(clock=ManualClock(50.0, 1.0))
        blobs = BlobStore(tmp_path / "blobs")
        report = ingest_directory(tmp_path, store, blobs)
        assert len(report.cataloged) == 5
        assert len(report.rejected) == 1
        assert report.rejected[0][0] == "broken.trc"

    def test_empty_directory(self, tmp_path):
        store = ProvenanceStore()
        report = ingest_directory(tmp_path, store, BlobStore(tmp_path / "blobs"))
        assert report.cataloged == [] and report.rejected == []

    def test_reingest_is_idempotent(self, tmp_path):
        self.make_files(tmp_path, 3)
        store = ProvenanceStore()
        blobs = BlobStore(tmp_path / "blobs")
        first = ingest_directory(tmp_path, store, blobs)
        again = ingest_directory(tmp_path, store, blobs)
        assert len(first.cataloged) == 3
        assert again.cataloged == []
        assert len(again.duplicates) == 3

    def test_csv_with_sidecar(self, tmp_path):
        rows = "\n".join(f"{i * 0.5},{float(i)}" for i in range(10))
        (tmp_path / "hand.csv").write_text("time,value\n" + rows + "\n")
        (tmp_path / "hand.json").write_text('{"net": "XX", "sta": "H1", "cha": "Z", "units": "m"}')
        store = ProvenanceStore()
        report = ingest_directory(tmp_path, store, BlobStore(tmp_path / "blobs"), fmt="csv")
        assert len(report.cataloged) == 1
        ent = store.entity(report.cataloged[0])
        assert ent.metadata["station"] == "XX.H1"
        assert ent.metadata["dt"] == 0.5

    def test_unreadable_root(self, tmp_path):
        from wavepipe.seismo import PathUnreadable

        with pytest.raises(PathUnreadable):
            ingest_directory(tmp_path / "missing", ProvenanceStore(), BlobStore(tmp_path / "blobs"))
