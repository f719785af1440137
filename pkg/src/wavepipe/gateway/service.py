"""The gateway service.

Thin HTTP surface over the engine, the lineage store, the fixture
catalogs and the registry. GETs never mutate state; every POST requires
a bearer token and rejects bad tokens before touching anything. All
/prov responses are the canonical bytes of the corresponding module
call, so proxy fidelity is byte-for-byte.
"""

from __future__ import annotations

import json
import urllib.parse
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..canonical import canonical_bytes, from_canonical
from ..dataflow.serialize import graph_from_document
from ..dataflow.units import decode_payload
from ..enactment import Engine, RunOptions
from ..errors import WavepipeError
from ..provenance.manifest import build_download_manifest
from ..provenance.provdoc import export_prov_bytes
from ..provenance.store import entities_payload, runs_payload, validate_criteria
from ..registry import NotFound, Registry
from ..seismo.trace import EventRecord, StationMeta, trace_from_payload, trace_to_payload
from .config import GatewayConfig
from .fixtures import load_events, load_regions, load_stations

STATUS_OF = {
    "NotFound": 404,
    "UnknownRun": 404,
    "UnknownEntity": 404,
    "UnknownWorkspace": 404,
    "UnknownParent": 404,
    "BlobMissing": 404,
    "AlreadyTerminal": 409,
    "DuplicateName": 409,
    "DuplicateRecord": 409,
    "HoldingsMiss": 416,
}
DEFAULT_ERROR_STATUS = 422


class HoldingsMiss(WavepipeError):
    code = "HoldingsMiss"


class AuthError(Exception):
    pass


@dataclass
class GatewayState:
    engine: Engine
    registry: Registry
    tokens: set[str]
    events: list[EventRecord]
    stations: list[StationMeta]
    regions: dict[str, dict]
    default_workspace: str


def _canonical_response(doc: Any, status_code: int = 200) -> Response:
    return Response(content=canonical_bytes(doc), media_type="application/json", status_code=status_code)


def _error_response(code: str, message: str, status: int) -> Response:
    return _canonical_response({"code": code, "message": message}, status_code=status)


def build_state(config: GatewayConfig, engine: Engine | None = None, registry: Registry | None = None) -> GatewayState:
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    if engine is None:
        engine = Engine(data_dir=data_dir)
        engine.provenance()
    if registry is None:
        registry = Registry(data_dir / "registry")
    if not registry.workspaces():
        registry.create_workspace("root")
    return GatewayState(
        engine=engine,
        registry=registry,
        tokens=config.tokens(),
        events=load_events(config.events_fixture),
        stations=load_stations(config.stations_fixture),
        regions=load_regions(config.regions_fixture),
        default_workspace=registry.workspaces()[0].workspace_id,
    )


def _parse_bbox(
    min_lat: float | None,
    max_lat: float | None,
    min_lon: float | None,
    max_lon: float | None,
    region: str | None,
    regions: Mapping[str, dict],
) -> dict | None:
    if region is not None:
        if region not in regions:
            raise NotFound(f"unknown region {region!r}")
        box = regions[region]
        return {"minLat": box["minLat"], "maxLat": box["maxLat"], "minLon": box["minLon"], "maxLon": box["maxLon"]}
    given = [v for v in (min_lat, max_lat, min_lon, max_lon) if v is not None]
    if not given:
        return None
    if len(given) != 4:
        raise WavepipeError("bbox needs minLat, maxLat, minLon and maxLon together")
    if min_lat > max_lat:
        raise WavepipeError(f"minLat {min_lat} > maxLat {max_lat}")
    if min_lon > max_lon:
        raise WavepipeError(f"minLon {min_lon} > maxLon {max_lon} (longitude wrap-around unsupported)")
    if not (-90 <= min_lat <= 90 and -90 <= max_lat <= 90 and -180 <= min_lon <= 180 and -180 <= max_lon <= 180):
        raise WavepipeError("bbox outside coordinate limits")
    return {"minLat": min_lat, "maxLat": max_lat, "minLon": min_lon, "maxLon": max_lon}


def _in_bbox(lat: float, lon: float, bbox: dict | None) -> bool:
    if bbox is None:
        return True
    return bbox["minLat"] <= lat <= bbox["maxLat"] and bbox["minLon"] <= lon <= bbox["maxLon"]


def _criteria_from_query(raw: str | None) -> dict:
    if not raw:
        return {}
    doc = json.loads(urllib.parse.unquote(raw))
    if not isinstance(doc, dict):
        raise WavepipeError("criteria must be a JSON object")
    return validate_criteria(doc)


def create_app(config: GatewayConfig | None = None, engine: Engine | None = None, registry: Registry | None = None) -> FastAPI:
    config = config or GatewayConfig()
    state = build_state(config, engine=engine, registry=registry)
    app = FastAPI(title="wavepipe gateway", docs_url=None, redoc_url=None)
    app.state.gateway = state
    _mount_routes(app, state)
    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")
    return app


def create_registry_app(config: GatewayConfig | None = None, registry: Registry | None = None) -> FastAPI:
    """Registry-only service surface (same routes, no enactment)."""
    config = config or GatewayConfig()
    state = build_state(config, engine=Engine(data_dir=Path(config.data_dir)), registry=registry)
    app = FastAPI(title="wavepipe registry", docs_url=None, redoc_url=None)
    app.state.gateway = state
    _mount_routes(app, state, registry_only=True)
    return app


def _mount_routes(app: FastAPI, state: GatewayState, registry_only: bool = False) -> None:
    engine = state.engine
    prov = engine.provenance()

    @app.exception_handler(WavepipeError)
    async def wavepipe_error(request: Request, exc: WavepipeError):
        return _error_response(exc.code, str(exc), STATUS_OF.get(exc.code, DEFAULT_ERROR_STATUS))

    @app.exception_handler(AuthError)
    async def auth_error(request: Request, exc: AuthError):
        return _error_response("Unauthorized", str(exc) or "missing or invalid bearer token", 401)

    @app.exception_handler(json.JSONDecodeError)
    async def json_error(request: Request, exc: json.JSONDecodeError):
        return _error_response("MalformedJson", str(exc), 422)

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthError("missing bearer token")
        if authorization.removeprefix("Bearer ").strip() not in state.tokens:
            raise AuthError("invalid bearer token")

    # --- registry ----------------------------------------------------------

    @app.get("/registry/workspaces")
    def registry_workspaces():
        return _canonical_response({"workspaces": [w.to_document() for w in state.registry.workspaces()]})

    @app.post("/registry/workspaces", dependencies=[Depends(require_token)])
    async def registry_create_workspace(request: Request):
        body = json.loads(await request.body() or b"{}")
        ws = state.registry.create_workspace(body["name"], body.get("parent"))
        return _canonical_response(ws.to_document(), status_code=201)

    @app.get("/registry/components")
    def registry_components(ws: str | None = None, terms: str = ""):
        workspace = ws or state.default_workspace
        hits = state.registry.search_components(workspace, terms)
        return _canonical_response(
            {
                "components": [
                    {"depth": h["depth"], "record": h["record"].to_document(), "shadowed": h["shadowed"]}
                    for h in hits
                ]
            }
        )

    @app.post("/registry/components", dependencies=[Depends(require_token)])
    async def registry_register(request: Request):
        body = json.loads(await request.body())
        record = state.registry.register_component(
            body.get("workspaceId") or state.default_workspace,
            body["kind"],
            body["name"],
            body["body"],
            body.get("annotations") or {},
        )
        return _canonical_response(record.to_document(), status_code=201)

    @app.get("/registry/resolve")
    def registry_resolve(name: str, ws: str | None = None, version: int | None = None):
        record = state.registry.resolve_component(ws or state.default_workspace, name, version)
        return _canonical_response(record.to_document())

    if registry_only:
        return

    # --- runs ---------------------------------------------------------------

    def _resolve_graph(body: Mapping[str, Any]):
        if body.get("graph") is not None:
            return graph_from_document(body["graph"])
        ref = body.get("graphRef")
        if not ref:
            raise WavepipeError("submission needs graph or graphRef")
        name, _, version = ref.partition("@")
        record = state.registry.resolve_component(
            body.get("workspace") or state.default_workspace, name, int(version) if version else None
        )
        if record.kind != "graph":
            raise NotFound(f"{ref!r} is not a graph component")
        return graph_from_document(json.loads(record.body))

    def _decode_feeds(feeds_doc: Mapping[str, Any] | None) -> dict:
        feeds = {}
        for name, items in (feeds_doc or {}).items():
            decoded = []
            for item in items:
                if isinstance(item, Mapping) and "kind" in item:
                    decoded.append(decode_payload(item))
                else:
                    decoded.append(item)
            feeds[name] = decoded
        return feeds

    @app.post("/runs", dependencies=[Depends(require_token)])
    async def submit_run(request: Request):
        body = json.loads(await request.body())
        graph = _resolve_graph(body)
        options = RunOptions(
            provenance_on=bool(body.get("provenanceOn", True)),
            spill_on=bool(body.get("spillOn", False)),
            workers=int(body.get("workers", 2)),
            run_metadata=dict(body.get("metadata") or {}),
            agent=body.get("agent", "gateway"),
        )
        run_id = engine.submit(
            graph,
            backend=body.get("backend", "sequential"),
            input_feeds=_decode_feeds(body.get("inputFeeds")),
            options=options,
        )
        return _canonical_response({"runId": run_id}, status_code=202)

    @app.get("/runs")
    def list_runs():
        records = sorted(engine.run_store.all_runs(), key=lambda r: (r.started_at or 0.0, r.run_id), reverse=True)
        return _canonical_response({"runs": [r.to_document() for r in records]})

    @app.get("/runs/{run_id}")
    def run_record(run_id: str):
        return _canonical_response(engine.run_store.get(run_id).to_document())

    @app.get("/runs/{run_id}/events")
    def run_events(run_id: str, since: int = 0):
        events = engine.run_store.events_since(run_id, since)
        latest = events[-1].counter if events else since
        return _canonical_response({"events": [e.to_document() for e in events], "latest": latest})

    @app.post("/runs/{run_id}/cancel", dependencies=[Depends(require_token)])
    def cancel_run(run_id: str):
        record = engine.cancel(run_id)
        return _canonical_response(record.to_document())

    # --- catalogs -------------------------------------------------------------

    @app.get("/catalog/events")
    def catalog_events(
        minLat: float | None = None,
        maxLat: float | None = None,
        minLon: float | None = None,
        maxLon: float | None = None,
        region: str | None = None,
        start: float | None = None,
        end: float | None = None,
        minMag: float | None = None,
        maxMag: float | None = None,
    ):
        bbox = _parse_bbox(minLat, maxLat, minLon, maxLon, region, state.regions)
        hits = [
            e
            for e in state.events
            if _in_bbox(e.latitude, e.longitude, bbox)
            and (start is None or e.origin_time >= start)
            and (end is None or e.origin_time <= end)
            and (minMag is None or e.magnitude >= minMag)
            and (maxMag is None or e.magnitude <= maxMag)
        ]
        hits.sort(key=lambda e: (-e.origin_time, e.event_id))
        return _canonical_response({"events": [e.to_document() for e in hits]})

    @app.get("/catalog/stations")
    def catalog_stations(
        minLat: float | None = None,
        maxLat: float | None = None,
        minLon: float | None = None,
        maxLon: float | None = None,
        region: str | None = None,
    ):
        bbox = _parse_bbox(minLat, maxLat, minLon, maxLon, region, state.regions)
        hits = [s for s in state.stations if _in_bbox(s.latitude, s.longitude, bbox)]
        hits.sort(key=lambda s: (s.net, s.sta))
        return _canonical_response({"stations": [s.to_document() for s in hits]})

    @app.get("/catalog/regions")
    def catalog_regions():
        return _canonical_response({"regions": state.regions})

    @app.get("/waveforms")
    def waveforms(sta: str, start: float, end: float, cha: str | None = None):
        criteria: dict[str, Any] = {"stage": "raw", "station": sta}
        if cha is not None:
            criteria["channel"] = cha
        holdings = prov.query_entities(criteria)
        if not holdings:
            raise NotFound(f"no holdings for station {sta!r}")
        if end < start:
            raise WavepipeError(f"start {start} is after end {end}")
        for entity in holdings:
            h_start, h_end = entity.metadata["startTime"], entity.metadata["endTime"]
            if h_end < start or h_start > end:
                continue
            data = engine.blob_store.get(entity.payload_digest)
            trace = trace_from_payload(decode_payload(from_canonical(data)))
            trimmed = trace.slice_time(max(start, h_start), min(end, h_end))
            return _canonical_response({"entityId": entity.entity_id, "trace": _trace_doc(trimmed)})
        raise HoldingsMiss(f"requested interval [{start}, {end}] is outside holdings for {sta!r}")

    # --- provenance proxies ------------------------------------------------------

    @app.get("/prov/runs")
    def prov_runs(criteria: str | None = Query(default=None)):
        entries = prov.query_runs(_criteria_from_query(criteria))
        return _canonical_response(runs_payload(entries))

    @app.get("/prov/entities")
    def prov_entities(criteria: str | None = Query(default=None)):
        entities = prov.query_entities(_criteria_from_query(criteria))
        return _canonical_response(entities_payload(entities))

    @app.get("/prov/lineage/{entity_id}")
    def prov_lineage(entity_id: str, direction: str = "ancestors", depth: int = 1):
        slice_ = prov.trace_lineage(entity_id, direction, depth)
        return _canonical_response(slice_.to_document())

    @app.get("/prov/ancestor/{entity_id}")
    def prov_ancestor(entity_id: str, criteria: str | None = Query(default=None)):
        ok, witness = prov.has_ancestor_matching(entity_id, _criteria_from_query(criteria))
        return _canonical_response({"matched": ok, "witness": witness})

    @app.get("/prov/export/{run_id}")
    def prov_export(run_id: str):
        return Response(content=export_prov_bytes(prov, run_id), media_type="application/json")

    @app.post("/downloads/script", dependencies=[Depends(require_token)])
    async def downloads_script(request: Request):
        body = json.loads(await request.body() or b"{}")
        entities = prov.query_entities(validate_criteria(body.get("criteria") or {}))
        base = str(request.base_url).rstrip("/")
        return PlainTextResponse(build_download_manifest(entities, base))

    @app.get("/blobs/{digest}")
    def blob(digest: str):
        return Response(content=engine.blob_store.get(digest), media_type="application/octet-stream")

    @app.get("/health")
    def health():
        return _canonical_response({"status": "ok"})


def _trace_doc(trace) -> dict:
    payload = trace_to_payload(trace)
    payload["samples"] = [float(x) for x in payload["samples"]]
    return payload


def serve(app: FastAPI, host: str, port: int) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
