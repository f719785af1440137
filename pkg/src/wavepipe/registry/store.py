"""Component registry.

Workspaces form a tree; resolution walks from a workspace up through
its ancestors and the nearest workspace holding the name wins
(shadowing). Components are immutable: re-registering a name appends
the next version, earlier versions stay resolvable explicitly.

Persistence is a directory of canonical documents plus an index file;
writes go through temp-then-rename so readers never see partial state.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..canonical import canonical_bytes, from_canonical
from ..clock import SYSTEM_CLOCK
from ..dataflow.serialize import descriptor_from_document, graph_from_document
from ..errors import WavepipeError, error_code

KINDS = ("pe", "function", "graph")


@error_code("UnknownWorkspace")
class UnknownWorkspace(WavepipeError):
    pass


@error_code("UnknownParent")
class UnknownParent(WavepipeError):
    pass


@error_code("DuplicateName")
class DuplicateName(WavepipeError):
    pass


@error_code("MalformedBody")
class MalformedBody(WavepipeError):
    pass


@error_code("NotFound")
class NotFound(WavepipeError):
    pass


@dataclass(frozen=True)
class Workspace:
    workspace_id: str
    name: str
    parent: str | None
    created_at: float

    def to_document(self) -> dict:
        return {
            "createdAt": self.created_at,
            "name": self.name,
            "parent": self.parent,
            "workspaceId": self.workspace_id,
        }


@dataclass(frozen=True)
class ComponentRecord:
    component_id: str
    workspace_id: str
    kind: str
    name: str
    version: int
    body: str
    annotations: Mapping[str, str] = field(default_factory=dict)
    registered_at: float = 0.0

    def to_document(self) -> dict:
        return {
            "annotations": dict(self.annotations),
            "body": self.body,
            "componentId": self.component_id,
            "kind": self.kind,
            "name": self.name,
            "registeredAt": self.registered_at,
            "version": self.version,
            "workspaceId": self.workspace_id,
        }


def _check_body(kind: str, body: str) -> None:
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedBody(f"body is not valid JSON: {exc}") from exc
    if kind == "graph":
        try:
            graph_from_document(doc)
        except Exception as exc:
            raise MalformedBody(f"graph body failed validation: {exc}") from exc
    elif kind == "pe":
        try:
            descriptor_from_document(doc)
        except Exception as exc:
            raise MalformedBody(f"descriptor body failed validation: {exc}") from exc
    elif kind == "function":
        if not isinstance(doc, dict):
            raise MalformedBody("function body must be a JSON object")
    else:
        raise MalformedBody(f"unknown component kind {kind!r}")


class Registry:
    def __init__(self, root: str | Path | None = None, clock=SYSTEM_CLOCK):
        self._clock = clock
        self._lock = threading.RLock()
        self._workspaces: dict[str, Workspace] = {}
        self._components: dict[str, ComponentRecord] = {}
        self._ws_counter = 0
        self._root = Path(root) if root is not None else None
        if self._root is not None:
            self._load()

    # --- persistence --------------------------------------------------------

    def _load(self) -> None:
        index = self._root / "index.json"
        if not index.exists():
            return
        doc = from_canonical(index.read_bytes())
        for ws in doc["workspaces"]:
            w = Workspace(ws["workspaceId"], ws["name"], ws["parent"], ws["createdAt"])
            self._workspaces[w.workspace_id] = w
        self._ws_counter = doc["wsCounter"]
        for cid in doc["components"]:
            body_doc = from_canonical((self._root / "components" / f"{_safe(cid)}.json").read_bytes())
            self._components[cid] = ComponentRecord(
                component_id=body_doc["componentId"],
                workspace_id=body_doc["workspaceId"],
                kind=body_doc["kind"],
                name=body_doc["name"],
                version=body_doc["version"],
                body=body_doc["body"],
                annotations=body_doc["annotations"],
                registered_at=body_doc["registeredAt"],
            )

    def _persist_index(self) -> None:
        if self._root is None:
            return
        self._root.mkdir(parents=True, exist_ok=True)
        doc = {
            "components": sorted(self._components),
            "workspaces": [w.to_document() for w in sorted(self._workspaces.values(), key=lambda w: w.workspace_id)],
            "wsCounter": self._ws_counter,
        }
        _atomic_write(self._root / "index.json", canonical_bytes(doc))

    def _persist_component(self, record: ComponentRecord) -> None:
        if self._root is None:
            return
        comp_dir = self._root / "components"
        comp_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(comp_dir / f"{_safe(record.component_id)}.json", canonical_bytes(record.to_document()))

    # --- workspaces -----------------------------------------------------------

    def create_workspace(self, name: str, parent: str | None = None) -> Workspace:
        with self._lock:
            if parent is not None and parent not in self._workspaces:
                raise UnknownParent(f"no workspace {parent!r}")
            siblings = [w for w in self._workspaces.values() if w.parent == parent]
            if any(w.name == name for w in siblings):
                raise DuplicateName(f"workspace {name!r} already exists under {parent!r}")
            self._ws_counter += 1
            ws = Workspace(
                workspace_id=f"ws{self._ws_counter:04d}",
                name=name,
                parent=parent,
                created_at=self._clock.now(),
            )
            self._workspaces[ws.workspace_id] = ws
            self._persist_index()
            return ws

    def workspace(self, workspace_id: str) -> Workspace:
        with self._lock:
            ws = self._workspaces.get(workspace_id)
        if ws is None:
            raise UnknownWorkspace(f"no workspace {workspace_id!r}")
        return ws

    def workspaces(self) -> list[Workspace]:
        with self._lock:
            return sorted(self._workspaces.values(), key=lambda w: w.workspace_id)

    def ancestry(self, workspace_id: str) -> list[Workspace]:
        """The workspace itself, then its parents up to the root."""
        chain = [self.workspace(workspace_id)]
        while chain[-1].parent is not None:
            chain.append(self.workspace(chain[-1].parent))
        return chain

    # --- components -------------------------------------------------------------

    def register_component(
        self,
        workspace_id: str,
        kind: str,
        name: str,
        body: str,
        annotations: Mapping[str, str] | None = None,
    ) -> ComponentRecord:
        _check_body(kind, body)
        with self._lock:
            if workspace_id not in self._workspaces:
                raise UnknownWorkspace(f"no workspace {workspace_id!r}")
            existing = [
                c for c in self._components.values() if c.workspace_id == workspace_id and c.name == name
            ]
            version = max((c.version for c in existing), default=0) + 1
            record = ComponentRecord(
                component_id=f"{workspace_id}/{name}@{version}",
                workspace_id=workspace_id,
                kind=kind,
                name=name,
                version=version,
                body=body,
                annotations=dict(annotations or {}),
                registered_at=self._clock.now(),
            )
            self._components[record.component_id] = record
            self._persist_component(record)
            self._persist_index()
            return record

    def resolve_component(self, workspace_id: str, name: str, version: int | None = None) -> ComponentRecord:
        """Nearest-ancestor resolution; default version is the highest
        in the winning workspace."""
        with self._lock:
            for ws in self.ancestry(workspace_id):
                here = [
                    c
                    for c in self._components.values()
                    if c.workspace_id == ws.workspace_id and c.name == name
                ]
                if not here:
                    continue
                if version is None:
                    return max(here, key=lambda c: c.version)
                for c in here:
                    if c.version == version:
                        return c
                raise NotFound(f"{name!r} has no version {version} in workspace {ws.workspace_id}")
        raise NotFound(f"component {name!r} not found from workspace {workspace_id!r}")

    def search_components(self, workspace_id: str, terms: Iterable[str] | str = ()) -> list[dict]:
        """Case-insensitive substring search over name and annotations
        across the visible ancestry; (depth, name) ranked; shadowed
        ancestor records are flagged, not hidden."""
        if isinstance(terms, str):
            terms = [t for t in terms.split() if t]
        terms = [t.lower() for t in terms]
        chain = self.ancestry(workspace_id)
        results: list[dict] = []
        names_nearer: set[str] = set()
        with self._lock:
            for depth, ws in enumerate(chain):
                latest: dict[str, ComponentRecord] = {}
                for c in self._components.values():
                    if c.workspace_id != ws.workspace_id:
                        continue
                    if c.name not in latest or c.version > latest[c.name].version:
                        latest[c.name] = c
                for name in sorted(latest):
                    record = latest[name]
                    haystack = (record.name + " " + " ".join(
                        f"{k} {v}" for k, v in sorted(record.annotations.items())
                    )).lower()
                    if all(t in haystack for t in terms):
                        results.append(
                            {"record": record, "depth": depth, "shadowed": record.name in names_nearer}
                        )
                names_nearer.update(latest)
        results.sort(key=lambda r: (r["depth"], r["record"].name))
        return results

    def components(self) -> list[ComponentRecord]:
        with self._lock:
            return sorted(self._components.values(), key=lambda c: c.component_id)


def _safe(component_id: str) -> str:
    return component_id.replace("/", "__").replace("@", "_v")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)
