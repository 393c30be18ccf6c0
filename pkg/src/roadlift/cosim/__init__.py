"""Lockstep 2D-3D co-simulation: wire protocol, endpoints, harness."""

from .harness import (
    LockstepClock,
    OffNetworkError,
    RoadLocator,
    Route,
    RouteError,
    RouteMover,
    SyncConfig,
    SyncEvent,
    TerrainEndpoint,
    TrafficEndpoint,
    load_routes,
    make_sync_event,
    run_scenario,
    sync_error,
    vehicle_elevation,
)
from .protocol import (
    FRAMINGS,
    MESSAGE_TYPES,
    PROTOCOL_VERSION,
    MessageStream,
    ProtocolViolation,
    VehicleState,
    encode_message,
)

__all__ = [
    "FRAMINGS",
    "MESSAGE_TYPES",
    "PROTOCOL_VERSION",
    "LockstepClock",
    "MessageStream",
    "OffNetworkError",
    "ProtocolViolation",
    "RoadLocator",
    "Route",
    "RouteError",
    "RouteMover",
    "SyncConfig",
    "SyncEvent",
    "TerrainEndpoint",
    "TrafficEndpoint",
    "VehicleState",
    "encode_message",
    "load_routes",
    "make_sync_event",
    "run_scenario",
    "sync_error",
    "vehicle_elevation",
]
