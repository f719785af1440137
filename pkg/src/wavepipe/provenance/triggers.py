"""Runtime trigger rules over freshly recorded lineage.

A rule is a scope (run or element name), a conjunction of conditions
over record metadata, and exactly one action: cancel the run, ship the
entity payload to a registered sink, or post a notification. Rules are
evaluated synchronously as steps are recorded, so a cancel fires before
the producing element touches its next unit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import WavepipeError, error_code

ACTIONS = ("cancelRun", "shipEntity", "notify")
OPS = ("eq", "lt", "gt", "range", "isnan", "matches")


@error_code("InvalidPredicateKey")
class InvalidPredicateKey(WavepipeError):
    pass


@error_code("UnknownSink")
class UnknownSink(WavepipeError):
    pass


@dataclass(frozen=True)
class Condition:
    key: str
    op: str
    value: Any = None

    def matches(self, meta: Mapping[str, Any]) -> bool:
        present = self.key in meta
        value = meta.get(self.key)
        if self.op == "isnan":
            return present and isinstance(value, float) and math.isnan(value)
        if not present:
            return False
        if self.op == "eq":
            return value == self.value
        if isinstance(value, float) and math.isnan(value):
            return False
        if self.op == "lt":
            return isinstance(value, (int, float)) and value < self.value
        if self.op == "gt":
            return isinstance(value, (int, float)) and value > self.value
        if self.op == "range":
            lo, hi = self.value
            return isinstance(value, (int, float)) and lo <= value <= hi
        if self.op == "matches":
            return isinstance(value, str) and re.search(self.value, value) is not None
        raise ValueError(f"unknown condition op {self.op!r}")


@dataclass(frozen=True)
class TriggerRule:
    rule_id: str
    predicate: tuple[Condition, ...]
    action: str
    target: str | None = None          # sink name or notify channel
    run_id: str | None = None          # scope: one run
    pe_name: str | None = None         # scope: every element with this name
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        for cond in self.predicate:
            if cond.op not in OPS:
                raise ValueError(f"unknown op {cond.op!r}")

    def in_scope(self, run_id: str, pe_name: str | None) -> bool:
        if self.run_id is not None and self.run_id != run_id:
            return False
        if self.pe_name is not None and self.pe_name != pe_name:
            return False
        return True

    def matches(self, meta: Mapping[str, Any]) -> bool:
        return all(cond.matches(meta) for cond in self.predicate)

    def to_document(self) -> dict:
        return {
            "action": self.action,
            "peName": self.pe_name,
            "predicate": [
                {"key": c.key, "op": c.op, "value": list(c.value) if isinstance(c.value, tuple) else c.value}
                for c in self.predicate
            ],
            "ruleId": self.rule_id,
            "runId": self.run_id,
            "target": self.target,
        }


@dataclass(frozen=True)
class FiredAction:
    rule_id: str
    action: str
    target: str | None
    record_id: str
    run_id: str
