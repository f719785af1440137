"""Gateway configuration: one JSON document plus environment overrides
(GATEWAY_ADDR, GATEWAY_DATA_DIR, GATEWAY_TOKENS)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

DEFAULT_TOKEN = "dev-token"  # used only when no token file is configured


@dataclass
class GatewayConfig:
    addr: str = "127.0.0.1:8321"
    data_dir: str = "gateway-data"
    token_file: str | None = None
    events_fixture: str | None = None
    stations_fixture: str | None = None
    regions_fixture: str | None = None
    ui_dir: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def host(self) -> str:
        return self.addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.addr.rsplit(":", 1)[1])

    def tokens(self) -> set[str]:
        if self.token_file is None:
            return {DEFAULT_TOKEN}
        lines = Path(self.token_file).read_text().splitlines()
        return {line.strip() for line in lines if line.strip() and not line.startswith("#")}


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> GatewayConfig:
    env = os.environ if env is None else env
    doc = {}
    if path is not None:
        doc = json.loads(Path(path).read_text())
    config = GatewayConfig(
        addr=doc.get("addr", GatewayConfig.addr),
        data_dir=doc.get("dataDir", GatewayConfig.data_dir),
        token_file=doc.get("tokenFile"),
        events_fixture=doc.get("eventsFixture"),
        stations_fixture=doc.get("stationsFixture"),
        regions_fixture=doc.get("regionsFixture"),
        ui_dir=doc.get("uiDir"),
        extras={k: v for k, v in doc.items() if k not in
                {"addr", "dataDir", "tokenFile", "eventsFixture", "stationsFixture", "regionsFixture", "uiDir"}},
    )
    if env.get("GATEWAY_ADDR"):
        config.addr = env["GATEWAY_ADDR"]
    if env.get("GATEWAY_DATA_DIR"):
        config.data_dir = env["GATEWAY_DATA_DIR"]
    if env.get("GATEWAY_TOKENS"):
        config.token_file = env["GATEWAY_TOKENS"]
    return config
