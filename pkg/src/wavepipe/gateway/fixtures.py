"""Deterministic fixture catalogs standing in for external event and
station services. No network calls, ever."""

from __future__ import annotations

import json
from pathlib import Path

from ..canonical import canonical_bytes, from_canonical
from ..seismo.trace import EventRecord, StationMeta

FIXTURE_EVENTS = [
    EventRecord("ev-0001", 1_420_070_400.0, 42.0, 13.0, 8.0, 6.0, (1.1, -0.3, -0.8, 0.2, 0.4, -0.1)),
    EventRecord("ev-0002", 1_423_526_400.0, 38.0, 15.0, 11.0, 4.8, None),
    EventRecord("ev-0003", 1_430_438_400.0, 36.5, 27.5, 60.0, 5.5, (0.4, 0.2, -0.6, 0.1, -0.2, 0.3)),
    EventRecord("ev-0004", 1_436_486_400.0, 45.3, 26.9, 95.0, 6.9, None),
    EventRecord("ev-0005", 1_441_065_600.0, 35.1, 25.2, 18.0, 7.2, (2.0, -1.0, -1.0, 0.5, 0.2, -0.4)),
    EventRecord("ev-0006", 1_444_262_400.0, 40.8, 14.1, 5.0, 4.1, None),
    EventRecord("ev-0007", 1_447_286_400.0, 37.9, 22.9, 30.0, 5.1, None),
    EventRecord("ev-0008", 1_451_606_400.0, 43.5, 12.2, 9.0, 4.5, None),
]

FIXTURE_STATIONS = [
    StationMeta("IV", "ROMA", 41.9, 12.5, 52.0),
    StationMeta("IV", "NAPL", 40.8, 14.2, 18.0),
    StationMeta("HL", "ATHN", 38.0, 23.7, 110.0),
    StationMeta("HL", "CRET", 35.3, 25.1, 42.0),
    StationMeta("GE", "ISTA", 41.0, 29.0, 75.0),
    StationMeta("CH", "ZURI", 47.4, 8.5, 408.0),
]

FIXTURE_REGIONS = {
    "aegean": {"maxLat": 41.0, "maxLon": 30.0, "minLat": 34.0, "minLon": 22.0},
    "central-italy": {"maxLat": 45.0, "maxLon": 16.0, "minLat": 40.0, "minLon": 10.0},
    "mediterranean": {"maxLat": 47.0, "maxLon": 32.0, "minLat": 33.0, "minLon": 8.0},
}


def write_default_fixtures(directory: str | Path) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": directory / "events.json",
        "stations": directory / "stations.json",
        "regions": directory / "regions.json",
    }
    paths["events"].write_bytes(canonical_bytes([e.to_document() for e in FIXTURE_EVENTS]))
    paths["stations"].write_bytes(canonical_bytes([s.to_document() for s in FIXTURE_STATIONS]))
    paths["regions"].write_bytes(canonical_bytes(FIXTURE_REGIONS))
    return paths


def load_events(path: str | Path | None) -> list[EventRecord]:
    if path is None:
        return list(FIXTURE_EVENTS)
    return [EventRecord.from_document(d) for d in from_canonical(Path(path).read_bytes())]


def load_stations(path: str | Path | None) -> list[StationMeta]:
    if path is None:
        return list(FIXTURE_STATIONS)
    return [StationMeta.from_document(d) for d in from_canonical(Path(path).read_bytes())]


def load_regions(path: str | Path | None) -> dict[str, dict]:
    if path is None:
        return dict(FIXTURE_REGIONS)
    return json.loads(Path(path).read_text())
