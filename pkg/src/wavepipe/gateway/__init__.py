"""HTTP facade over enactment, provenance, catalogs and the registry."""

from .config import GatewayConfig, load_config
from .service import create_app, create_registry_app

__all__ = ["GatewayConfig", "create_app", "create_registry_app", "load_config"]
