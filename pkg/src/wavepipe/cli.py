"""Command-line entry point.

Thin shims over the modules: validate and run graphs, query lineage,
manage the registry, serve the gateway, ingest data, and run the two
demos (ambient-noise all-pairs correlation and the forward/misfit
loop). Usage errors exit 2; runtime failures exit 1 with the module
error code on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .blobstore import BlobStore
from .canonical import canonical_bytes, canonical_json, from_canonical
from .dataflow import load_graph_file, validate_graph
from .dataflow.units import encode_payload
from .enactment import Engine, RunOptions
from .errors import WavepipeError
from .provenance import ProvenanceStore, build_download_manifest
from .provenance.provdoc import export_prov_bytes
from .provenance.store import entities_payload, runs_payload
from .registry import Registry
from .seismo import (
    Trace,
    VelocityModel1D,
    all_pairs_feeds,
    build_all_pairs_graph,
    compute_misfit,
    correlation_from_payload,
    default_prep_steps,
    first_arrival_time,
    forward_simulate_1d,
    ingest_directory,
    read_trace,
)

DEMO_SEED = 8_421_731


class _Fail(click.ClickException):
    exit_code = 1

    def __init__(self, exc: WavepipeError):
        super().__init__(f"{exc.code}: {exc}")

    def show(self, file=None):
        click.echo(f"ERROR {self.message}", err=True)


def _guard(fn):
    """Map module errors to exit code 1 with the error code printed."""

    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except WavepipeError as exc:
            raise _Fail(exc) from exc

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@click.group()
def main():
    """Streaming dataflow workflows with lineage, desk scale."""


# --- validate / run -----------------------------------------------------------


@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
@_guard
def validate(graph_file, as_json):
    """Validate a workflow graph document."""
    graph = load_graph_file(graph_file)
    report = validate_graph(graph)
    if as_json:
        doc = {
            "issues": [
                {"code": i.code, "location": i.location, "message": i.message, "severity": i.severity}
                for i in report.issues
            ],
            "ok": report.ok,
        }
        click.echo(canonical_json(doc))
    else:
        for issue in report.issues:
            click.echo(f"{issue.severity.upper():7s} {issue.code} {issue.location}: {issue.message}")
        click.echo("ok" if report.ok else "INVALID")
    if not report.ok:
        sys.exit(1)


def _load_feed_file(path: Path) -> list:
    if path.is_dir():
        from .seismo.trace import trace_to_payload

        return [trace_to_payload(read_trace(p)) for p in sorted(path.glob("*.trc"))]
    items = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        items.append(from_canonical(canonical_bytes(doc)))
    return items


@main.command()
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(["sequential", "threaded", "multiprocess"]), default="sequential")
@click.option("--workers", type=int, default=2, help="worker count for multiprocess plans")
@click.option("--max-load", type=float, default=None, help="per-worker load limit")
@click.option("--provenance", "prov_path", type=click.Path(), default=None, help="lineage store path (enables capture)")
@click.option("--spill", is_flag=True, help="spill overflowing buffers to disk")
@click.option("--feed", "feeds", multiple=True, help="NAME=FILE (.jsonl payloads or directory of .trc)")
@click.option("--tag", "tags", multiple=True, help="KEY=VALUE run metadata")
@click.option("--out", type=click.Path(), default=None, help="directory for terminal outputs")
@click.option("--events-file", type=click.Path(), default=None, help="mirror run events as JSON lines")
@_guard
def run(graph_file, backend, workers, max_load, prov_path, spill, feeds, tags, out, events_file):
    """Enact a workflow graph on the chosen backend."""
    graph = load_graph_file(graph_file)
    input_feeds = {}
    for spec in feeds:
        name, _, file_part = spec.partition("=")
        if not file_part:
            raise click.UsageError(f"--feed needs NAME=FILE, got {spec!r}")
        input_feeds[name] = _load_feed_file(Path(file_part))
    metadata = {}
    for tag in tags:
        key, _, value = tag.partition("=")
        try:
            metadata[key] = json.loads(value)
        except json.JSONDecodeError:
            metadata[key] = value
    prov_store = ProvenanceStore(prov_path) if prov_path else None
    engine = Engine(data_dir=Path(out) if out else None, prov_store=prov_store)
    options = RunOptions(
        provenance_on=prov_store is not None,
        spill_on=spill,
        workers=workers,
        max_load=max_load,
        run_metadata=metadata,
    )
    record = engine.execute(graph, backend=backend, input_feeds=input_feeds, options=options)
    if events_file:
        with open(events_file, "w") as fh:
            for event in engine.run_store.events_since(record.run_id):
                fh.write(canonical_json(event.to_document()) + "\n")
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for key, units in engine.outputs(record.run_id).items():
            safe = key.replace("/", "_").replace(".", "_")
            with open(out_dir / f"{safe}.jsonl", "w") as fh:
                for unit in units:
                    fh.write(canonical_json(encode_payload(unit.payload)) + "\n")
    click.echo(f"run {record.run_id}: {record.status}")
    for entry in record.error_log:
        click.echo(f"  error at {entry['peInstance']} seq={entry['seq']}: {entry['message']}", err=True)
    if record.status != "completed":
        sys.exit(1)


# --- provenance -----------------------------------------------------------------


@main.group()
def prov():
    """Query and export the lineage store."""


def _criteria_option(raw: str | None) -> dict:
    return json.loads(raw) if raw else {}


@prov.command("query")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--runs/--entities", "query_runs", default=True)
@click.option("--criteria", default=None, help="JSON object; lists of two numbers are ranges")
@click.option("--json", "as_json", is_flag=True)
@_guard
def prov_query(store_path, query_runs, criteria, as_json):
    """Search runs or entities by metadata value ranges."""
    store = ProvenanceStore(store_path)
    crit = _criteria_option(criteria)
    if query_runs:
        doc = runs_payload(store.query_runs(crit))
        rows = [(r["runId"], r["metadata"]) for r in doc["runs"]]
    else:
        doc = entities_payload(store.query_entities(crit))
        rows = [(e["entityId"], e["metadata"]) for e in doc["entities"]]
    if as_json:
        click.echo(canonical_json(doc))
    else:
        for rid, meta in rows:
            click.echo(f"{rid}\t{json.dumps(meta, sort_keys=True)}")


@prov.command("lineage")
@click.argument("entity_id")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--direction", type=click.Choice(["ancestors", "descendants"]), default="ancestors")
@click.option("--depth", type=int, default=5)
@click.option("--json", "as_json", is_flag=True)
@_guard
def prov_lineage(entity_id, store_path, direction, depth, as_json):
    """Walk the derivation graph around an entity."""
    store = ProvenanceStore(store_path)
    slice_ = store.trace_lineage(entity_id, direction, depth)
    if as_json:
        click.echo(canonical_json(slice_.to_document()))
    else:
        for edge in slice_.edges:
            click.echo(f"{edge.derived} <- {edge.source} (by {edge.activity_id})")
        if slice_.expandable:
            click.echo("expandable: " + ", ".join(slice_.expandable))


@prov.command("export")
@click.argument("run_id")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None)
@_guard
def prov_export(run_id, store_path, out):
    """Export one run as a PROV-style JSON document."""
    store = ProvenanceStore(store_path)
    data = export_prov_bytes(store, run_id)
    if out:
        Path(out).write_bytes(data)
        click.echo(f"wrote {out}")
    else:
        click.echo(data.decode())


@prov.command("manifest")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--criteria", default=None)
@click.option("--base-url", default="http://localhost:8321")
@_guard
def prov_manifest(store_path, criteria, base_url):
    """Bulk download manifest for a metadata query."""
    store = ProvenanceStore(store_path)
    entities = store.query_entities(_criteria_option(criteria))
    click.echo(build_download_manifest(entities, base_url), nl=False)


# --- registry ----------------------------------------------------------------------


@main.group()
def registry():
    """Manage the component registry."""


@registry.command("add")
@click.argument("kind", type=click.Choice(["pe", "function", "graph"]))
@click.argument("name")
@click.argument("body_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--root", "root_dir", type=click.Path(), default="registry")
@click.option("--ws", default=None, help="workspace id (default: first root workspace)")
@click.option("--annotation", "annotations", multiple=True, help="KEY=VALUE")
@_guard
def registry_add(kind, name, body_file, root_dir, ws, annotations):
    """Register a component version from a document file."""
    reg = Registry(root_dir)
    if not reg.workspaces():
        reg.create_workspace("root")
    workspace = ws or reg.workspaces()[0].workspace_id
    notes = dict(a.partition("=")[::2] for a in annotations)
    record = reg.register_component(workspace, kind, name, Path(body_file).read_text(), notes)
    click.echo(f"{record.component_id}")


@registry.command("resolve")
@click.argument("name")
@click.option("--root", "root_dir", type=click.Path(exists=True), default="registry")
@click.option("--ws", default=None)
@click.option("--version", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@_guard
def registry_resolve(name, root_dir, ws, version, as_json):
    """Resolve a component through the workspace hierarchy."""
    reg = Registry(root_dir)
    workspace = ws or reg.workspaces()[0].workspace_id
    record = reg.resolve_component(workspace, name, version)
    if as_json:
        click.echo(canonical_json(record.to_document()))
    else:
        click.echo(record.component_id)


@registry.command("serve")
@click.option("--root", "root_dir", type=click.Path(), default="registry")
@click.option("--addr", default="127.0.0.1:8321")
@_guard
def registry_serve(root_dir, addr):
    """Serve the registry endpoints over HTTP."""
    from .gateway import GatewayConfig, create_registry_app
    from .gateway.service import serve

    config = GatewayConfig(addr=addr, data_dir=str(Path(root_dir).parent / "registry-data"))
    app = create_registry_app(config, registry=Registry(root_dir))
    click.echo(f"registry listening on {addr}")
    serve(app, config.host, config.port)


# --- gateway ------------------------------------------------------------------------


@main.command("gateway")
@click.argument("action", type=click.Choice(["serve", "init-fixtures"]))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--addr", default=None)
@click.option("--data-dir", default=None)
@_guard
def gateway_cmd(action, config_path, addr, data_dir):
    """Serve the HTTP gateway or write default fixture catalogs."""
    from .gateway import create_app, load_config
    from .gateway.fixtures import write_default_fixtures
    from .gateway.service import serve

    config = load_config(config_path)
    if addr:
        config.addr = addr
    if data_dir:
        config.data_dir = data_dir
    if action == "init-fixtures":
        paths = write_default_fixtures(Path(config.data_dir) / "fixtures")
        for kind, path in sorted(paths.items()):
            click.echo(f"{kind}: {path}")
        return
    app = create_app(config)
    click.echo(f"gateway listening on {config.addr}")
    serve(app, config.host, config.port)


# --- ingest --------------------------------------------------------------------------


@main.command()
@click.argument("directory", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["traceDoc", "csv"]), default=None)
@click.option("--data-dir", default="gateway-data", help="store location (blobs + lineage)")
@_guard
def ingest(directory, fmt, data_dir):
    """Catalog every parseable file in a directory."""
    data = Path(data_dir)
    store = ProvenanceStore(data / "prov.jsonl")
    blobs = BlobStore(data / "blobs")
    report = ingest_directory(directory, store, blobs, fmt=fmt)
    click.echo(f"cataloged {len(report.cataloged)}, rejected {len(report.rejected)}, duplicates {len(report.duplicates)}")
    for name, reason in report.rejected:
        click.echo(f"  rejected {name}: {reason}", err=True)


# --- demos ------------------------------------------------------------------------------


def _noise_channels(n: int, windows: int, seed: int, dt: float = 0.01, window_seconds: float = 4.0):
    """Seeded synthetic ambient noise: a common wavefield delayed per
    channel plus independent noise, so pair correlations carry peaks."""
    rng = np.random.default_rng(seed)
    samples = int(round(windows * window_seconds / dt))
    common = rng.standard_normal(samples + 64)
    traces = []
    for i in range(n):
        delay = (i * 3) % 32
        data = common[delay : delay + samples] + 0.8 * rng.standard_normal(samples)
        traces.append(Trace(samples=data, dt=dt, net="NZ", sta=f"S{i:02d}", cha="Z"))
    return traces


@main.group()
def demo():
    """Reproducible end-to-end demonstrations."""


@demo.command("noise")
@click.option("--channels", type=int, default=6)
@click.option("--windows", type=int, default=3)
@click.option("--seed", type=int, default=DEMO_SEED)
@click.option("--max-lag", type=int, default=25)
@click.option("--backend", type=click.Choice(["sequential", "threaded", "multiprocess"]), default="sequential")
@click.option("--out", type=click.Path(), default="noise-demo")
@_guard
def demo_noise(channels, windows, seed, max_lag, backend, out):
    """All-pairs ambient-noise correlation with full lineage capture."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces = _noise_channels(channels, windows, seed)
    graph = build_all_pairs_graph(
        channels,
        max_lag_samples=max_lag,
        window_seconds=4.0,
        prep_steps=default_prep_steps(lo=1.0, hi=20.0),
    )
    store = ProvenanceStore(out_dir / "prov.jsonl")
    engine = Engine(data_dir=out_dir, prov_store=store)
    record = engine.execute(
        graph,
        backend=backend,
        input_feeds=all_pairs_feeds(traces),
        options=RunOptions(provenance_on=True, run_metadata={"channels": channels, "demo": "noise", "windows": windows}),
    )
    if record.status != "completed":
        raise WavepipeError(f"demo run ended {record.status}")
    stacked = 0
    for key, units in sorted(engine.outputs(record.run_id).items()):
        if not key.startswith("stack"):
            continue
        result = correlation_from_payload(units[0].payload)
        doc = {
            "lags": [float(x) for x in result.lags],
            "pair": list(result.pair),
            "values": [float(x) for x in result.values],
            "windowCount": result.window_count,
        }
        (out_dir / f"{key.split('.')[0]}.json").write_text(canonical_json(doc))
        stacked += 1
    corr_activities = [a for a in store.activities_of_run(record.run_id) if a.pe_name == "seismo.correlate"]
    click.echo(f"run {record.run_id}: {record.status}")
    click.echo(f"channels {channels}, windows {windows}")
    click.echo(f"stacked correlations written: {stacked}")
    click.echo(f"correlation activities recorded: {len(corr_activities)}")
    click.echo(f"lineage store: {out_dir / 'prov.jsonl'}")


@demo.command("misfit")
@click.option("--out", type=click.Path(), default="misfit-demo")
@click.option("--perturbation", type=float, default=0.03, help="relative velocity change")
@_guard
def demo_misfit(out, perturbation):
    """Forward simulation, model perturbation, misfit analysis."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    c, length, dx, dt, f0, nt = 1000.0, 1000.0, 5.0, 0.002, 10.0, 900
    receivers = [0.0, 300.0, 600.0]
    base_model = VelocityModel1D.homogeneous(length, dx, c)
    observed = forward_simulate_1d(base_model, 0.0, f0, receivers, dt, nt)
    perturbed = VelocityModel1D.homogeneous(length, dx, c * (1.0 + perturbation))
    synthetic = forward_simulate_1d(perturbed, 0.0, f0, receivers, dt, nt)

    self_l2 = compute_misfit(observed[1], observed[1], "l2")
    click.echo(f"l2 misfit of unperturbed model vs itself: {self_l2.value}")

    reports = []
    for obs, syn, pos in zip(observed, synthetic, receivers):
        l2 = compute_misfit(obs, syn, "l2")
        cc = compute_misfit(obs, syn, "ccShift")
        reports.append(
            {
                "ccShiftSeconds": cc.value,
                "l2": l2.value,
                "normalizedCC": cc.normalized_cc,
                "receiverMeters": pos,
            }
        )
        click.echo(
            f"receiver {pos:6.1f} m: l2={l2.value:.6g} ccShift={cc.value:+.4f} s cc={cc.normalized_cc:.4f}"
        )
    arrivals = {
        f"{pos:.0f}m": first_arrival_time(trace) for pos, trace in zip(receivers, observed)
    }
    (out_dir / "misfit.json").write_text(
        canonical_json({"arrivals": arrivals, "perturbation": perturbation, "reports": reports})
    )
    click.echo(f"wrote {out_dir / 'misfit.json'}")


if __name__ == "__main__":
    main()
