from __future__ import annotations

import numpy as np
import pytest

import wavepipe.dataflow as df
from wavepipe.clock import ManualClock


@pytest.fixture
def clock():
    return ManualClock(start=1_000_000.0, step=0.001)


@pytest.fixture
def identity_desc():
    return df.atomic("identity", "map.identity")


def chain_graph(n: int, desc=None):
    """A -> B -> C ... with a feed into the first node."""
    desc = desc or df.atomic("identity", "map.identity")
    names = [chr(ord("A") + i) for i in range(n)]
    nodes = {name: desc for name in names}
    edges = [df.connect(names[i], "out", names[i + 1], "in") for i in range(n - 1)]
    feeds = {"feed": df.PortRef(names[0], "in", "input")}
    return df.build_graph(nodes, edges, feeds)


def scalar_payloads(n: int, start: float = 0.0):
    return [start + float(i) for i in range(n)]


def array_payload(values):
    return np.asarray(values, dtype=np.float64)
