"""Injectable time source.

All run and provenance timestamps come from a single clock object so
tests can pin time deterministically.
"""

from __future__ import annotations

import time


class Clock:
    def now(self) -> float:
        """Seconds since the epoch."""
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> float:
        return time.time()


class ManualClock(Clock):
    """Deterministic clock for tests; advances only on demand."""

    def __init__(self, start: float = 0.0, step: float = 0.0):
        self._t = float(start)
        self._step = float(step)

    def now(self) -> float:
        t = self._t
        self._t += self._step
        return t

    def advance(self, dt: float) -> None:
        self._t += dt


SYSTEM_CLOCK = SystemClock()
