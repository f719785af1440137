"""Trace, station and event types plus the on-disk trace document.

Trace documents (suffix ``.trc``) are a small header record followed by
float64 little-endian samples; a CSV fallback (``time,value`` rows plus
a JSON sidecar) covers hand-made fixtures.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..canonical import canonical_bytes, from_canonical
from ..errors import WavepipeError, error_code

TRACE_MAGIC = b"WPT1"
_HDR_LEN = struct.Struct("<I")


@error_code("MalformedTrace")
class MalformedTrace(WavepipeError):
    pass


@dataclass(frozen=True)
class Trace:
    samples: np.ndarray
    dt: float
    start_time: float = 0.0
    net: str = ""
    sta: str = ""
    cha: str = ""
    units: str = "counts"
    nonfinite_ok: bool = False

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.nonfinite_ok and samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("trace samples must be finite (or set nonfinite_ok)")

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def end_time(self) -> float:
        return self.start_time + max(self.n - 1, 0) * self.dt

    @property
    def station_id(self) -> str:
        return f"{self.net}.{self.sta}"

    @property
    def channel_id(self) -> str:
        return f"{self.net}.{self.sta}.{self.cha}"

    def with_samples(self, samples: np.ndarray, dt: float | None = None) -> "Trace":
        return replace(self, samples=samples, dt=self.dt if dt is None else dt)

    def slice_time(self, start: float, end: float) -> "Trace":
        """Sub-trace covering [start, end] clipped to the trace span."""
        i0 = max(0, int(np.ceil((start - self.start_time) / self.dt - 1e-9)))
        i1 = min(self.n - 1, int(np.floor((end - self.start_time) / self.dt + 1e-9)))
        if i1 < i0:
            raise ValueError("empty slice")
        return replace(self, samples=self.samples[i0 : i1 + 1], start_time=self.start_time + i0 * self.dt)


@dataclass(frozen=True)
class StationMeta:
    net: str
    sta: str
    latitude: float
    longitude: float
    elevation: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} out of range")

    def to_document(self) -> dict:
        return {
            "elevation": self.elevation,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "net": self.net,
            "sta": self.sta,
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "StationMeta":
        return StationMeta(doc["net"], doc["sta"], doc["latitude"], doc["longitude"], doc.get("elevation", 0.0))


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    origin_time: float
    latitude: float
    longitude: float
    depth_km: float
    magnitude: float
    moment_tensor: tuple[float, ...] | None = None  # Mrr, Mtt, Mpp, Mrt, Mrp, Mtp

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} out of range")
        if self.depth_km < 0:
            raise ValueError("depth must be >= 0")
        if not np.isfinite(self.magnitude):
            raise ValueError("magnitude must be finite")
        if self.moment_tensor is not None and len(self.moment_tensor) != 6:
            raise ValueError("moment tensor needs 6 components")

    def to_document(self) -> dict:
        return {
            "depthKm": self.depth_km,
            "eventId": self.event_id,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "magnitude": self.magnitude,
            "momentTensor": list(self.moment_tensor) if self.moment_tensor else None,
            "originTime": self.origin_time,
        }

    @staticmethod
    def from_document(doc: Mapping[str, Any]) -> "EventRecord":
        mt = doc.get("momentTensor")
        return EventRecord(
            event_id=doc["eventId"],
            origin_time=doc["originTime"],
            latitude=doc["latitude"],
            longitude=doc["longitude"],
            depth_km=doc["depthKm"],
            magnitude=doc["magnitude"],
            moment_tensor=tuple(mt) if mt else None,
        )


# --- payload conversion (traces ride streams as record payloads) -----------


def trace_to_payload(trace: Trace) -> dict:
    return {
        "cha": trace.cha,
        "dt": trace.dt,
        "kind": "trace",
        "net": trace.net,
        "samples": trace.samples,
        "sta": trace.sta,
        "startTime": trace.start_time,
        "units": trace.units,
    }


def trace_from_payload(payload: Mapping[str, Any], nonfinite_ok: bool = False) -> Trace:
    return Trace(
        samples=np.asarray(payload["samples"], dtype=np.float64),
        dt=float(payload["dt"]),
        start_time=float(payload["startTime"]),
        net=payload["net"],
        sta=payload["sta"],
        cha=payload["cha"],
        units=payload.get("units", "counts"),
        nonfinite_ok=nonfinite_ok,
    )


def trace_metadata(trace: Trace) -> dict:
    return {
        "channel": trace.channel_id,
        "dt": trace.dt,
        "endTime": trace.end_time,
        "startTime": trace.start_time,
        "station": trace.station_id,
    }


# --- trace documents ---------------------------------------------------------


def write_trace(trace: Trace, path: str | Path) -> Path:
    path = Path(path)
    header = canonical_bytes(
        {
            "cha": trace.cha,
            "dt": trace.dt,
            "n": trace.n,
            "net": trace.net,
            "sta": trace.sta,
            "startTime": trace.start_time,
            "units": trace.units,
        }
    )
    body = np.ascontiguousarray(trace.samples, dtype="<f8").tobytes()
    path.write_bytes(TRACE_MAGIC + _HDR_LEN.pack(len(header)) + header + body)
    return path


def read_trace(path: str | Path) -> Trace:
    raw = Path(path).read_bytes()
    if len(raw) < len(TRACE_MAGIC) + _HDR_LEN.size or raw[: len(TRACE_MAGIC)] != TRACE_MAGIC:
        raise MalformedTrace(f"{path}: not a trace document")
    offset = len(TRACE_MAGIC)
    (hdr_len,) = _HDR_LEN.unpack(raw[offset : offset + _HDR_LEN.size])
    offset += _HDR_LEN.size
    if len(raw) < offset + hdr_len:
        raise MalformedTrace(f"{path}: truncated header")
    header = from_canonical(raw[offset : offset + hdr_len])
    offset += hdr_len
    expected = header["n"] * 8
    body = raw[offset:]
    if len(body) != expected:
        raise MalformedTrace(f"{path}: expected {header['n']} samples, found {len(body) // 8}")
    samples = np.frombuffer(body, dtype="<f8").copy()
    return Trace(
        samples=samples,
        dt=header["dt"],
        start_time=header["startTime"],
        net=header["net"],
        sta=header["sta"],
        cha=header["cha"],
        units=header["units"],
    )


def read_csv_trace(path: str | Path) -> Trace:
    """CSV fallback: time,value rows + JSON sidecar with the codes."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise MalformedTrace(f"{path}: missing metadata sidecar {sidecar.name}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedTrace(f"{sidecar}: invalid JSON: {exc}") from exc
    times: list[float] = []
    values: list[float] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#") or line.lower().startswith("time"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedTrace(f"{path}:{lineno}: expected time,value")
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise MalformedTrace(f"{path}:{lineno}: {exc}") from exc
    if len(times) < 2:
        raise MalformedTrace(f"{path}: need at least 2 rows")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-12):
        raise MalformedTrace(f"{path}: rows are not uniformly sampled")
    return Trace(
        samples=np.asarray(values),
        dt=dt,
        start_time=float(meta.get("startTime", times[0])),
        net=meta.get("net", ""),
        sta=meta.get("sta", ""),
        cha=meta.get("cha", ""),
        units=meta.get("units", "counts"),
    )
