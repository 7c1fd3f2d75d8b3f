"""Model-service contracts with interchangeable offline-stub and HTTP backends."""

from listqa.gateway.base import (
    DEFAULT_EXCLUDED_TYPES,
    EntityMention,
    Gateway,
    GatewayConfig,
    GatewayError,
    ScoredSpan,
    build_qg_prompt,
)
from listqa.gateway.remote import RemoteGateway, fetch_health
from listqa.gateway.stub import StubGateway


def build_gateway(config: GatewayConfig) -> Gateway:
    """Construct the backend named by config.backend."""
    if config.backend == "stub":
        return StubGateway.from_dir(config)
    if config.backend == "remote":
        return RemoteGateway(config)
    raise GatewayError(f"unknown gateway backend {config.backend!r}")


__all__ = [
    "DEFAULT_EXCLUDED_TYPES",
    "EntityMention",
    "Gateway",
    "GatewayConfig",
    "GatewayError",
    "RemoteGateway",
    "ScoredSpan",
    "StubGateway",
    "build_gateway",
    "build_qg_prompt",
    "fetch_health",
]
