"""Workspace hierarchy, versioning and shadowing resolution."""

from __future__ import annotations

import json
import random

import pytest

import wavepipe.dataflow as df
from wavepipe.canonical import canonical_bytes
from wavepipe.clock import ManualClock
from wavepipe.registry import (
    DuplicateName,
    MalformedBody,
    NotFound,
    Registry,
    UnknownParent,
)


def make_registry(root=None):
    return Registry(root, clock=ManualClock(100.0, 1.0))


def fn_body(label="x"):
    return canonical_bytes({"kind": "connection-note", "label": label}).decode()


def graph_body():
    g = df.build_graph(
        {"A": df.atomic("identity", "map.identity")},
        [],
        {"feed": df.PortRef("A", "in", "input")},
    )
    return canonical_bytes(df.graph_document(g)).decode()


class TestWorkspaces:
    def test_child_sees_root_components(self):
        r = make_registry()
        root = r.create_workspace("root")
        r.register_component(root.workspace_id, "function", "taper", fn_body())
        child = r.create_workspace("seismo", parent=root.workspace_id)
        assert r.resolve_component(child.workspace_id, "taper").workspace_id == root.workspace_id

    def test_unknown_parent(self):
        r = make_registry()
        with pytest.raises(UnknownParent):
            r.create_workspace("x", parent="ws9999")

    def test_sibling_name_clash(self):
        r = make_registry()
        root = r.create_workspace("root")
        r.create_workspace("x", parent=root.workspace_id)
        with pytest.raises(DuplicateName):
            r.create_workspace("x", parent=root.workspace_id)


class TestRegistration:
    def test_versions_dense_from_one(self):
        r = make_registry()
        root = r.create_workspace("root")
        c1 = r.register_component(root.workspace_id, "function", "bandpass", fn_body("a"))
        c2 = r.register_component(root.workspace_id, "function", "bandpass", fn_body("b"))
        assert (c1.version, c2.version) == (1, 2)
        old = r.resolve_component(root.workspace_id, "bandpass", version=1)
        assert old.body == fn_body("a")
        latest = r.resolve_component(root.workspace_id, "bandpass")
        assert latest.version == 2

    def test_graph_body_is_validated(self):
        r = make_registry()
        root = r.create_workspace("root")
        r.register_component(root.workspace_id, "graph", "pipeline", graph_body())
        bad = json.dumps({"nodes": {}, "edges": [{"from": ["x", "o"], "to": ["y", "i"], "capacity": 1}], "sourceFeeds": {}})
        with pytest.raises(MalformedBody):
            r.register_component(root.workspace_id, "graph", "broken", bad)

    def test_non_json_body_rejected(self):
        r = make_registry()
        root = r.create_workspace("root")
        with pytest.raises(MalformedBody):
            r.register_component(root.workspace_id, "function", "x", "not json {")


class TestResolution:
    def test_grandchild_falls_through_to_root(self):
        r = make_registry()
        root = r.create_workspace("root")
        child = r.create_workspace("c", parent=root.workspace_id)
        grand = r.create_workspace("g", parent=child.workspace_id)
        r.register_component(root.workspace_id, "function", "taper", fn_body())
        got = r.resolve_component(grand.workspace_id, "taper")
        assert got.workspace_id == root.workspace_id

    def test_shadowing_nearest_wins(self):
        r = make_registry()
        root = r.create_workspace("root")
        child = r.create_workspace("c", parent=root.workspace_id)
        r.register_component(root.workspace_id, "function", "taper", fn_body("root"))
        r.register_component(child.workspace_id, "function", "taper", fn_body("child"))
        assert r.resolve_component(child.workspace_id, "taper").body == fn_body("child")
        assert r.resolve_component(root.workspace_id, "taper").body == fn_body("root")

    def test_not_found(self):
        r = make_registry()
        root = r.create_workspace("root")
        with pytest.raises(NotFound):
            r.resolve_component(root.workspace_id, "ghost")

    def test_randomized_trees_match_brute_force(self):
        rng = random.Random(4)
        for trial in range(30):
            r = make_registry()
            root = r.create_workspace("root")
            mids = [r.create_workspace(f"m{i}", parent=root.workspace_id) for i in range(2)]
            leaves = [r.create_workspace(f"l{i}", parent=mids[i % 2].workspace_id) for i in range(4)]
            every = [root] + mids + leaves
            names = ["alpha", "beta", "gamma"]
            placed: dict[str, dict[str, str]] = {w.workspace_id: {} for w in every}
            for name in names:
                for w in every:
                    if rng.random() < 0.5:
                        rec = r.register_component(w.workspace_id, "function", name, fn_body(f"{w.workspace_id}:{name}"))
                        placed[w.workspace_id][name] = rec.body
            for w in every:
                for name in names:
                    # oracle: plain walk up the parent chain
                    expected = None
                    for anc in r.ancestry(w.workspace_id):
                        if name in placed[anc.workspace_id]:
                            expected = placed[anc.workspace_id][name]
                            break
                    if expected is None:
                        with pytest.raises(NotFound):
                            r.resolve_component(w.workspace_id, name)
                    else:
                        assert r.resolve_component(w.workspace_id, name).body == expected


class TestSearch:
    def test_substring_over_name_and_annotations(self):
        r = make_registry()
        root = r.create_workspace("root")
        r.register_component(root.workspace_id, "function", "crosscorrelate", fn_body())
        r.register_component(root.workspace_id, "function", "stacker", fn_body(), annotations={"doc": "correlation stacking"})
        r.register_component(root.workspace_id, "function", "taper", fn_body())
        hits = r.search_components(root.workspace_id, "corr")
        assert [h["record"].name for h in hits] == ["crosscorrelate", "stacker"]

    def test_empty_terms_lists_all_visible(self):
        r = make_registry()
        root = r.create_workspace("root")
        child = r.create_workspace("c", parent=root.workspace_id)
        r.register_component(root.workspace_id, "function", "a", fn_body())
        r.register_component(child.workspace_id, "function", "b", fn_body())
        hits = r.search_components(child.workspace_id)
        assert [h["record"].name for h in hits] == ["b", "a"]

    def test_shadowed_ancestor_flagged(self):
        r = make_registry()
        root = r.create_workspace("root")
        child = r.create_workspace("c", parent=root.workspace_id)
        r.register_component(root.workspace_id, "function", "taper", fn_body("root"))
        r.register_component(child.workspace_id, "function", "taper", fn_body("child"))
        hits = r.search_components(child.workspace_id, "taper")
        flags = {(h["record"].workspace_id, h["shadowed"]) for h in hits}
        assert flags == {(child.workspace_id, False), (root.workspace_id, True)}


class TestPersistence:
    def test_reload_from_disk(self, tmp_path):
        r = make_registry(tmp_path)
        root = r.create_workspace("root")
        child = r.create_workspace("c", parent=root.workspace_id)
        r.register_component(root.workspace_id, "graph", "pipeline", graph_body(), annotations={"doc": "demo"})
        r.register_component(child.workspace_id, "function", "taper", fn_body())

        r2 = Registry(tmp_path)
        assert [w.name for w in r2.workspaces()] == ["root", "c"]
        rec = r2.resolve_component(child.workspace_id, "pipeline")
        assert rec.kind == "graph" and rec.annotations == {"doc": "demo"}
        assert r2.resolve_component(child.workspace_id, "taper").workspace_id == child.workspace_id
