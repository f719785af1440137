"""Built-in catalog elements.

Generic map/debug elements usable from serialized graphs. Domain
elements register themselves from their own packages (see
seismo.elements).
"""

from __future__ import annotations

import math

import numpy as np

from .descriptors import Element, ParamSpec, atomic, map_element, register_element


@register_element("map.identity")
@map_element
def _identity(payload, params):
    return payload


@register_element("map.affine")
@map_element
def _affine(payload, params):
    scale = params.get("scale", 1.0)
    offset = params.get("offset", 0.0)
    if isinstance(payload, np.ndarray):
        return payload * scale + offset
    return payload * scale + offset


@register_element("map.negate")
@map_element
def _negate(payload, params):
    return -payload


@register_element("map.sqrt_abs")
@map_element
def _sqrt_abs(payload, params):
    if isinstance(payload, np.ndarray):
        return np.sqrt(np.abs(payload))
    return math.sqrt(abs(payload))


@register_element("debug.fail_at")
class _FailAt(Element):
    """Raises on the n-th consumed unit; exercises failure paths."""

    def __init__(self, params):
        self._fail_seq = int(params.get("seq", 1))
        self._seen = 0

    def process(self, ctx, port, unit):
        self._seen += 1
        if self._seen == self._fail_seq:
            raise RuntimeError(f"induced failure at unit {self._seen}")
        ctx.emit("out", unit.payload)


@register_element("debug.nan_at")
class _NanAt(Element):
    """Replaces the n-th payload with NaN; exercises trigger rules."""

    def __init__(self, params):
        self._nan_seq = int(params.get("seq", 1))
        self._seen = 0

    def process(self, ctx, port, unit):
        self._seen += 1
        payload = unit.payload
        if self._seen == self._nan_seq:
            if isinstance(payload, np.ndarray):
                payload = payload.copy()
                payload[0] = np.nan
            else:
                payload = float("nan")
        ctx.emit("out", payload)


def descriptor(name: str, **kwargs):
    """Descriptor for a catalog element, body by reference."""
    return atomic(name=name, body=name, **kwargs)


AFFINE_SCHEMA = {
    "scale": ParamSpec("float", default=1.0),
    "offset": ParamSpec("float", default=0.0),
}
