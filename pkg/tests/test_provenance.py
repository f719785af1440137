"""Lineage store: recording, queries vs linear-scan oracles, lineage
slices vs brute-force reachability, export round-trips, triggers."""

from __future__ import annotations

import math
import random

import pytest

from wavepipe.canonical import canonical_bytes
from wavepipe.clock import ManualClock
from wavepipe.provenance import (
    Condition,
    EntityDraft,
    InvalidPredicateKey,
    MalformedRange,
    ProvenanceStore,
    TriggerRule,
    UnknownEntity,
    UnknownSink,
    build_download_manifest,
    export_prov_document,
    import_prov_document,
)
from wavepipe.provenance.manifest import manifest_entries
from wavepipe.provenance.provdoc import export_prov_bytes
from wavepipe.provenance.store import UnknownProvRun


def make_store(clock=None):
    return ProvenanceStore(clock=clock or ManualClock(start=1000.0, step=1.0))


def draft(eid, meta=None):
    return EntityDraft(entity_id=eid, payload_digest=f"digest-{eid}", metadata=meta or {})


def record(store, run, act, pe, inputs, outputs, **kw):
    return store.record_step(
        run,
        activity_id=act,
        pe_instance=pe,
        pe_name=kw.pop("pe_name", pe),
        input_entity_ids=inputs,
        outputs=outputs,
        **kw,
    )


class TestRecordStep:
    def test_one_in_one_out(self):
        s = make_store()
        s.register_run("r1")
        record(s, "r1", "a1", "src", [], [draft("e1")])
        record(s, "r1", "a2", "next", ["e1"], [draft("e2")])
        assert s.counts() == {"agents": 1, "activities": 2, "derivations": 1, "entities": 2, "runs": 1}

    def test_two_inputs_share_one_activity(self):
        s = make_store()
        s.register_run("r1")
        record(s, "r1", "a1", "src", [], [draft("e1"), draft("e2")])
        record(s, "r1", "a2", "join", ["e1", "e2"], [draft("e3")])
        edges = s.derivations_of_run("r1")
        assert {(e.derived, e.source) for e in edges} == {("e3", "e1"), ("e3", "e2")}
        assert {e.activity_id for e in edges} == {"a2"}

    def test_source_step_has_no_edges(self):
        s = make_store()
        s.register_run("r1")
        record(s, "r1", "a1", "src", [], [draft(f"e{i}") for i in range(3)])
        assert len(s.entities_of_run("r1")) == 3
        assert s.derivations_of_run("r1") == []

    def test_unknown_run_and_entity(self):
        s = make_store()
        with pytest.raises(UnknownProvRun):
            record(s, "nope", "a1", "x", [], [])
        s.register_run("r1")
        with pytest.raises(UnknownEntity):
            record(s, "r1", "a1", "x", ["missing"], [draft("e1")])


def seeded_fixture_store(n_chains=4, chain_len=4):
    """Deterministic store with tagged runs and station metadata."""
    s = make_store()
    mags = [4.8, 5.5, 6.9, 7.2]
    for c in range(n_chains):
        run = f"run{c}"
        s.register_run(run, metadata={"magnitude": mags[c % len(mags)], "region": f"zone{c % 2}"})
        prev = None
        for i in range(chain_len):
            eid = f"{run}:e{i}"
            meta = {"stage": "raw" if i == 0 else f"s{i}", "station": f"NET.STA{c}"}
            record(s, run, f"{run}:a{i}", f"pe{i}", [prev] if prev else [], [draft(eid, meta)])
            prev = eid
    return s


class TestQueries:
    def test_empty_criteria_returns_all_runs(self):
        s = seeded_fixture_store()
        assert len(s.query_runs({})) == 4

    def test_magnitude_range(self):
        s = seeded_fixture_store()
        got = {r.metadata["magnitude"] for r in s.query_runs({"magnitude": [5.0, 7.0]})}
        assert got == {5.5, 6.9}

    def test_malformed_range(self):
        s = seeded_fixture_store()
        with pytest.raises(MalformedRange):
            s.query_runs({"magnitude": [7.0, 5.0]})

    def test_entity_station_match_equals_linear_scan(self):
        s = seeded_fixture_store()
        criteria = {"station": "NET.STA1"}
        got = {e.entity_id for e in s.query_entities(criteria)}
        oracle = {
            e.entity_id
            for run in ("run0", "run1", "run2", "run3")
            for e in s.entities_of_run(run)
            if e.metadata.get("station") == "NET.STA1"
        }
        assert got == oracle and got

    def test_unknown_key_matches_nothing(self):
        s = seeded_fixture_store()
        assert s.query_entities({"no.such.key": 1}) == []

    def test_newest_first(self):
        s = seeded_fixture_store()
        runs = s.query_runs({})
        times = [r.created_at for r in runs]
        assert times == sorted(times, reverse=True)


def brute_force_reach(store, start, direction, max_depth):
    """Oracle: plain breadth-first reachability over the full edge list."""
    edges = []
    for run in [r.run_id for r in store.query_runs({})]:
        edges.extend(store.derivations_of_run(run))
    frontier = {start}
    seen = {start: 0}
    for depth in range(1, max_depth + 1):
        nxt = set()
        for e in edges:
            if direction == "ancestors" and e.derived in frontier and e.source not in seen:
                seen[e.source] = depth
                nxt.add(e.source)
            if direction == "descendants" and e.source in frontier and e.derived not in seen:
                seen[e.derived] = depth
                nxt.add(e.derived)
        frontier = nxt
    return seen


class TestLineage:
    def test_chain_ancestors(self):
        s = seeded_fixture_store()
        slice_ = s.trace_lineage("run0:e3", "ancestors", max_depth=10)
        oracle = brute_force_reach(s, "run0:e3", "ancestors", 10)
        assert {e.entity_id for e in slice_.entities} == set(oracle)
        assert len(slice_.edges) == 3
        assert slice_.expandable == ()

    def test_source_has_no_ancestors(self):
        s = seeded_fixture_store()
        slice_ = s.trace_lineage("run0:e0", "ancestors", max_depth=5)
        assert [e.entity_id for e in slice_.entities] == ["run0:e0"]
        assert slice_.edges == ()

    def test_depth_cutoff_marks_expandable(self):
        s = seeded_fixture_store()
        slice_ = s.trace_lineage("run0:e3", "ancestors", max_depth=1)
        oracle = brute_force_reach(s, "run0:e3", "ancestors", 1)
        assert {e.entity_id for e in slice_.entities} == set(oracle)
        assert len(slice_.edges) == 1
        assert slice_.expandable == ("run0:e2",)

    def test_unknown_entity(self):
        s = seeded_fixture_store()
        with pytest.raises(UnknownEntity):
            s.trace_lineage("ghost", "ancestors", 3)


class TestHasAncestorMatching:
    def test_grandparent_stage_raw(self):
        s = seeded_fixture_store()
        ok, witness = s.has_ancestor_matching("run0:e2", {"stage": "raw"})
        assert ok and witness == "run0:e0"

    def test_strict_ancestors_only(self):
        s = seeded_fixture_store()
        ok, witness = s.has_ancestor_matching("run0:e2", {"stage": "s2"})
        assert not ok and witness is None

    def test_source_entity_never_matches(self):
        s = seeded_fixture_store()
        ok, _ = s.has_ancestor_matching("run0:e0", {"stage": "raw"})
        assert not ok


class TestExportImport:
    def test_counts(self):
        s = seeded_fixture_store(n_chains=1, chain_len=3)
        doc = export_prov_document(s, "run0")
        assert len(doc["prov:activity"]) == 3
        assert len(doc["prov:entity"]) == 3
        assert len(doc["prov:agent"]) == 1
        assert len(doc["prov:wasGeneratedBy"]) == 3
        assert len(doc["prov:wasDerivedFrom"]) == 2

    def test_empty_run(self):
        s = make_store()
        s.register_run("empty")
        doc = export_prov_document(s, "empty")
        assert doc["prov:entity"] == {}
        assert len(doc["prov:agent"]) == 1

    def test_round_trip_bytes_identical(self):
        s = seeded_fixture_store(n_chains=2)
        original = export_prov_bytes(s, "run1")
        target = make_store()
        run_id = import_prov_document(target, export_prov_document(s, "run1"))
        assert run_id == "run1"
        assert export_prov_bytes(target, "run1") == original


class TestPersistence:
    def test_reopen_rebuilds_indexes(self, tmp_path):
        path = tmp_path / "prov.jsonl"
        s = ProvenanceStore(path, clock=ManualClock(10.0, 1.0))
        s.register_run("r1", metadata={"magnitude": 5.0})
        record(s, "r1", "a1", "src", [], [draft("e1", {"station": "X.Y"})])
        record(s, "r1", "a2", "next", ["e1"], [draft("e2")])
        s.close()

        s2 = ProvenanceStore(path)
        assert s2.counts()["entities"] == 2
        assert s2.query_entities({"station": "X.Y"})[0].entity_id == "e1"
        assert s2.trace_lineage("e2", "ancestors", 5).edges[0].source == "e1"


class TestTriggers:
    def test_nan_rule_fires(self):
        s = make_store()
        s.register_run("r1")
        rule = TriggerRule("nan-cancel", (Condition("payload.max", "isnan"),), "cancelRun")
        s.register_trigger(rule)
        result = record(s, "r1", "a1", "src", [], [draft("e1", {"payload.max": math.nan})])
        assert [a.rule_id for a in result.fired] == ["nan-cancel"]
        assert result.fired[0].action == "cancelRun"

    def test_ship_requires_registered_sink(self, tmp_path):
        s = make_store()
        with pytest.raises(UnknownSink):
            s.register_trigger(TriggerRule("ship", (), "shipEntity", target="nowhere"))
        s.register_sink("dest", tmp_path)
        s.register_trigger(TriggerRule("ship", (), "shipEntity", target="dest"))

    def test_predicate_key_must_be_declared(self):
        s = make_store()
        with pytest.raises(InvalidPredicateKey):
            s.register_trigger(TriggerRule("bad", (Condition("made.up", "eq", 1),), "notify", target="c"))

    def test_scoped_rule_count_matches_oracle(self):
        s = make_store()
        s.register_run("r1")
        rule = TriggerRule("stage-watch", (Condition("stage", "eq", "corr"),), "notify", target="chan")
        s.register_trigger(rule, extra_keys=["stage"])
        fired_total = 0
        for i in range(10):
            meta = {"stage": "corr" if i % 2 == 0 else "other"}
            result = record(s, "r1", f"a{i}", "pe", [], [draft(f"e{i}", meta)])
            fired_total += len(result.fired)
        assert fired_total == 5

    def test_no_rules_no_actions(self):
        s = make_store()
        s.register_run("r1")
        result = record(s, "r1", "a1", "pe", [], [draft("e1")])
        assert result.fired == ()

    def test_range_and_matches_conditions(self):
        meta = {"magnitude": 6.0, "station": "NET.STA7"}
        assert Condition("magnitude", "range", (5.0, 7.0)).matches(meta)
        assert not Condition("magnitude", "range", (6.5, 7.0)).matches(meta)
        assert Condition("station", "matches", r"STA\d").matches(meta)
        assert Condition("magnitude", "gt", 5.5).matches(meta)
        assert not Condition("magnitude", "lt", 5.5).matches(meta)


class TestManifest:
    def test_entries_match_entities(self):
        s = seeded_fixture_store(n_chains=1, chain_len=3)
        entities = s.query_entities({"station": "NET.STA0"})
        script = build_download_manifest(entities, "http://localhost:8080")
        triples = manifest_entries(script)
        assert len(triples) == len(entities) == 3
        for (url, digest, dest), ent in zip(triples, entities):
            assert digest == ent.payload_digest
            assert url.endswith(f"/blobs/{digest}")

    def test_empty_is_header_only(self):
        script = build_download_manifest([], "http://x")
        assert manifest_entries(script) == []
        assert script.startswith("#")


class TestRandomizedOracleEquivalence:
    def test_query_and_lineage_match_brute_force(self):
        rng = random.Random(99)
        s = make_store()
        s.register_run("big", metadata={"magnitude": 5.0})
        ids = []
        for i in range(300):
            eid = f"e{i:04d}"
            n_inputs = 0 if i < 5 else rng.randint(1, min(3, len(ids)))
            inputs = rng.sample(ids, n_inputs) if n_inputs else []
            meta = {"band": rng.choice(["low", "mid", "high"]), "score": rng.uniform(0, 10)}
            record(s, "big", f"a{i:04d}", f"pe{i % 7}", inputs, [draft(eid, meta)])
            ids.append(eid)

        criteria = {"band": "mid", "score": [2.0, 8.0]}
        got = {e.entity_id for e in s.query_entities(criteria)}
        oracle = {
            e.entity_id
            for e in s.entities_of_run("big")
            if e.metadata["band"] == "mid" and 2.0 <= e.metadata["score"] <= 8.0
        }
        assert got == oracle

        for eid in rng.sample(ids, 20):
            for depth in (1, 2, 5):
                slice_ = s.trace_lineage(eid, "ancestors", depth)
                assert {e.entity_id for e in slice_.entities} == set(
                    brute_force_reach(s, eid, "ancestors", depth)
                )
            ok, witness = s.has_ancestor_matching(eid, {"band": "high"})
            ancestors = set(brute_force_reach(s, eid, "ancestors", 10_000)) - {eid}
            oracle_ok = any(s.entity(a).metadata["band"] == "high" for a in ancestors)
            assert ok == oracle_ok
            if ok:
                assert witness in ancestors and s.entity(witness).metadata["band"] == "high"
