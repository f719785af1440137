"""Processing element descriptors and the runtime element contract.

A descriptor is the declarative half of an element: ports, parameter
schema, statefulness, and a body. Atomic bodies are either a name in
the element catalog (serializable) or a factory callable (in-process
only). Composite bodies embed a whole graph; see composite.py.

The runtime half is ``Element``: ``process`` is called once per
consumed unit, ``on_finish`` once after all input streams end. Elements
emit through the context; the enactment layer owns sequencing,
provenance and delivery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..errors import WavepipeError, error_code
from .units import DataUnit

INPUT = "input"
OUTPUT = "output"


@error_code("ParameterMismatch")
class SchemaError(WavepipeError):
    pass


@error_code("UnknownElement")
class UnknownElement(WavepipeError):
    pass


@dataclass(frozen=True, slots=True)
class PortRef:
    pe: str
    port: str
    direction: str

    def __post_init__(self):
        if self.direction not in (INPUT, OUTPUT):
            raise ValueError(f"bad port direction {self.direction!r}")

    def __str__(self) -> str:
        return f"{self.pe}.{self.port}"


def in_port(pe: str, port: str) -> PortRef:
    return PortRef(pe, port, INPUT)


def out_port(pe: str, port: str) -> PortRef:
    return PortRef(pe, port, OUTPUT)


PARAM_KINDS = ("int", "float", "string", "bool", "array")


@dataclass(frozen=True, slots=True)
class ParamSpec:
    kind: str
    required: bool = False
    default: Any = None

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise SchemaError(f"unknown parameter kind {self.kind!r}")
        if self.default is not None and not param_value_ok(self.kind, self.default):
            raise SchemaError(f"default {self.default!r} does not satisfy kind {self.kind}")


def param_value_ok(kind: str, value: Any) -> bool:
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "string":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "array":
        if isinstance(value, np.ndarray):
            return True
        return isinstance(value, (list, tuple)) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        )
    return False


class Element:
    """Runtime behaviour of an atomic processing element."""

    def on_start(self, ctx: "Context") -> None:
        pass

    def process(self, ctx: "Context", port: str, unit: DataUnit) -> None:
        raise NotImplementedError

    def on_finish(self, ctx: "Context") -> None:
        pass


class Context:
    """What an element sees of its surroundings during a run.

    Backends provide concrete contexts; elements only call ``emit``.
    ``derived_from`` overrides the lineage default (the unit currently
    being processed) and accepts units or provenance entity ids.
    """

    instance_id: str
    params: Mapping[str, Any]

    def emit(
        self,
        port: str,
        payload: Any,
        metadata: Mapping[str, Any] | None = None,
        derived_from: list | None = None,
    ) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class PEDescriptor:
    name: str
    version: str = "1"
    input_ports: tuple[str, ...] = ()
    output_ports: tuple[str, ...] = ()
    stateful: bool = False
    parameter_schema: Mapping[str, ParamSpec] = field(default_factory=dict)
    kind: str = "atomic"
    body: Any = None

    def __post_init__(self):
        if len(set(self.input_ports)) != len(self.input_ports):
            raise SchemaError(f"{self.name}: duplicate input port names")
        if len(set(self.output_ports)) != len(self.output_ports):
            raise SchemaError(f"{self.name}: duplicate output port names")

    def check_parameters(self, bindings: Mapping[str, Any]) -> None:
        """Raise SchemaError when bindings violate the schema."""
        for key, value in bindings.items():
            spec = self.parameter_schema.get(key)
            if spec is None:
                raise SchemaError(f"{self.name}: unknown parameter {key!r}")
            if not param_value_ok(spec.kind, value):
                raise SchemaError(
                    f"{self.name}: parameter {key!r}={value!r} does not satisfy kind {spec.kind}"
                )
        for key, spec in self.parameter_schema.items():
            if spec.required and key not in bindings:
                raise SchemaError(f"{self.name}: missing required parameter {key!r}")

    def effective_parameters(self, bindings: Mapping[str, Any]) -> dict:
        self.check_parameters(bindings)
        merged = {k: s.default for k, s in self.parameter_schema.items() if s.default is not None}
        merged.update(bindings)
        return merged


# --- element catalog ------------------------------------------------------

_CATALOG: dict[str, Callable[[Mapping[str, Any]], Element]] = {}


def register_element(name: str):
    """Register a factory (params -> Element) under a catalog name."""

    def apply(factory):
        _CATALOG[name] = factory
        return factory

    return apply


def catalog_names() -> list[str]:
    return sorted(_CATALOG)


def resolve_body(body: Any) -> Callable[[Mapping[str, Any]], Element]:
    if isinstance(body, str):
        factory = _CATALOG.get(body)
        if factory is None:
            raise UnknownElement(f"no element registered as {body!r}")
        return factory
    if callable(body):
        return body
    raise UnknownElement(f"descriptor body {body!r} is not executable")


class _MapElement(Element):
    def __init__(self, fn, params):
        self._fn = fn
        self._params = params

    def process(self, ctx, port, unit):
        result = self._fn(unit.payload, self._params)
        if result is None:
            return
        outputs = result if isinstance(result, list) else [result]
        for payload in outputs:
            ctx.emit("out", payload)


def map_element(fn: Callable[[Any, Mapping[str, Any]], Any]):
    """Factory for one-in one-out elements defined by a payload function."""

    def factory(params: Mapping[str, Any]) -> Element:
        return _MapElement(fn, params)

    return factory


def atomic(
    name: str,
    body: Any,
    inputs: tuple[str, ...] = ("in",),
    outputs: tuple[str, ...] = ("out",),
    schema: Mapping[str, ParamSpec] | None = None,
    stateful: bool = False,
    version: str = "1",
) -> PEDescriptor:
    """Shorthand for an atomic descriptor."""
    return PEDescriptor(
        name=name,
        version=version,
        input_ports=tuple(inputs),
        output_ports=tuple(outputs),
        stateful=stateful,
        parameter_schema=dict(schema or {}),
        kind="atomic",
        body=body,
    )
