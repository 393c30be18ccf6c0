"""Lockstep co-simulation harness over a built 3D network.

Endpoint A is the authoritative 2D traffic mock: deterministic
constant-speed polyline followers, z always 0.  Endpoint B is the 3D
terrain mock: it integrates the same routes itself (optionally with
injected drift or a one-shot fault), assigns z by projecting onto the
network, and snaps horizontally back to A whenever the horizontal sync
error exceeds the threshold (strictly).

Both clocks are derived, t = n * dt, never accumulated, so they agree
bit-exactly at every step.  The whole exchange runs over the wire
protocol in ``protocol``; endpoint B serves from a separate thread (or
a TCP peer), which keeps the lockstep barrier an actual property of the
message flow rather than of shared memory.
"""

from __future__ import annotations

import json
import math
import socket
import threading
from dataclasses import dataclass

import numpy as np

from ..network import RoadNetwork3D
from .protocol import (
    MessageStream,
    ProtocolViolation,
    VehicleState,
    check_hello,
    expect,
    hello_message,
)

TRACE_SCHEMA = "cosim-trace/1"
SUMMARY_SCHEMA = "cosim-summary/1"

DEFAULT_SNAP_DISTANCE = 5.0


class OffNetworkError(ValueError):
    """Vehicle position beyond snap distance from every segment."""


class RouteError(ValueError):
    """Route references unknown or disconnected segments."""


@dataclass(frozen=True)
class SyncConfig:
    dt: float = 0.05
    resync_threshold: float = 0.5
    max_steps: int = 1000
    snap_distance: float = DEFAULT_SNAP_DISTANCE

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.resync_threshold > 0.0:
            raise ValueError(f"resync_threshold must be positive, got {self.resync_threshold!r}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps!r}")
        if not self.snap_distance > 0.0:
            raise ValueError(f"snap_distance must be positive, got {self.snap_distance!r}")


@dataclass(frozen=True)
class LockstepClock:
    """Step counter with derived time: t is always n * dt exactly."""

    n: int
    dt: float

    @property
    def t(self) -> float:
        return self.n * self.dt

    def advanced(self) -> "LockstepClock":
        return LockstepClock(self.n + 1, self.dt)


@dataclass(frozen=True)
class SyncEvent:
    step: int
    vehicle_id: str
    sync_error: float
    action: str


def make_sync_event(step: int, vehicle_id: str, err: float, threshold: float) -> SyncEvent:
    action = "resync" if err > threshold else "none"
    return SyncEvent(step, vehicle_id, err, action)


def sync_error(a: VehicleState, b: VehicleState) -> float:
    """Horizontal position discrepancy; z is deliberately excluded."""
    if a.vehicle_id != b.vehicle_id:
        raise ValueError(f"vehicle id mismatch: {a.vehicle_id!r} vs {b.vehicle_id!r}")
    return math.hypot(a.x - b.x, a.y - b.y)


class RoadLocator:
    """Projects xy positions onto the nearest segment profile leg."""

    def __init__(self, net: RoadNetwork3D, snap_distance: float = DEFAULT_SNAP_DISTANCE):
        p0 = []
        p1 = []
        for seg in sorted(net.segments, key=lambda s: s.id):
            pts = seg.points3d()
            p0.append(pts[:-1])
            p1.append(pts[1:])
        if not p0:
            raise ValueError("network has no segments")
        self._p0 = np.concatenate(p0)
        self._p1 = np.concatenate(p1)
        d = self._p1 - self._p0
        self._d = d
        self._dd = d[:, 0] ** 2 + d[:, 1] ** 2
        self.snap_distance = snap_distance

    def elevation(self, x: float, y: float) -> float:
        qx = x - self._p0[:, 0]
        qy = y - self._p0[:, 1]
        t = np.clip((qx * self._d[:, 0] + qy * self._d[:, 1]) / self._dd, 0.0, 1.0)
        cx = self._p0[:, 0] + t * self._d[:, 0]
        cy = self._p0[:, 1] + t * self._d[:, 1]
        dist2 = (x - cx) ** 2 + (y - cy) ** 2
        k = int(np.argmin(dist2))
        if dist2[k] > self.snap_distance ** 2:
            raise OffNetworkError(
                f"({x!r}, {y!r}) is {math.sqrt(dist2[k]):.3f} m from the nearest "
                f"segment, beyond snap distance {self.snap_distance} m"
            )
        tk = float(t[k])
        if tk == 0.0:
            return float(self._p0[k, 2])
        if tk == 1.0:
            return float(self._p1[k, 2])
        return float(self._p0[k, 2] + tk * self._d[k, 2])


def vehicle_elevation(net: RoadNetwork3D, x: float, y: float,
                      snap_distance: float = DEFAULT_SNAP_DISTANCE) -> float:
    """Elevation of the road surface under (x, y); see RoadLocator."""
    return RoadLocator(net, snap_distance).elevation(x, y)


@dataclass(frozen=True)
class Route:
    vehicle_id: str
    segment_ids: tuple[str, ...]
    speed: float

    def __post_init__(self) -> None:
        if not self.segment_ids:
            raise RouteError(f"route {self.vehicle_id!r} has no segments")
        if not self.speed > 0.0:
            raise RouteError(f"route {self.vehicle_id!r}: speed must be positive")


def load_routes(text: str) -> list[Route]:
    """Parse the routes JSON: a list of {vehicle_id, segments, speed}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RouteError(f"routes file is not valid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise RouteError("routes document must be a JSON list")
    routes = []
    for entry in doc:
        try:
            routes.append(Route(entry["vehicle_id"], tuple(entry["segments"]),
                                float(entry["speed"])))
        except (KeyError, TypeError) as exc:
            raise RouteError(f"malformed route entry {entry!r}: {exc}") from exc
    ids = [r.vehicle_id for r in routes]
    if len(set(ids)) != len(ids):
        raise RouteError("duplicate vehicle_id in routes")
    return routes


def _route_path(net: RoadNetwork3D, route: Route) -> np.ndarray:
    """Concatenated xy path of the route's segments, oriented to chain."""
    segs = []
    for sid in route.segment_ids:
        try:
            segs.append(net.segment_by_id(sid))
        except KeyError:
            raise RouteError(
                f"route {route.vehicle_id!r}: unknown segment {sid!r}"
            ) from None

    oriented: list[np.ndarray] = []
    current_node: str | None = None
    for i, seg in enumerate(segs):
        pts = seg.points3d()[:, :2]
        if i == 0:
            if len(segs) == 1:
                forward = True
            else:
                nxt = {segs[1].from_node, segs[1].to_node}
                if seg.to_node in nxt:
                    forward = True
                elif seg.from_node in nxt:
                    forward = False
                else:
                    raise RouteError(
                        f"route {route.vehicle_id!r}: segments {seg.id!r} and "
                        f"{segs[1].id!r} do not share a node"
                    )
        else:
            if seg.from_node == current_node:
                forward = True
            elif seg.to_node == current_node:
                forward = False
            else:
                raise RouteError(
                    f"route {route.vehicle_id!r}: segment {seg.id!r} does not "
                    f"start at node {current_node!r}"
                )
        if not forward:
            pts = pts[::-1]
        current_node = seg.to_node if forward else seg.from_node
        oriented.append(pts if i == 0 else pts[1:])
    return np.concatenate(oriented)


class RouteMover:
    """Constant-speed follower along a fixed xy path.

    Holds position at the path end once reached; reported speed stays
    the route speed throughout.
    """

    def __init__(self, path_xy: np.ndarray, speed: float):
        legs = np.diff(path_xy, axis=0)
        leg_len = np.hypot(legs[:, 0], legs[:, 1])
        self._path = path_xy
        self._cum = np.concatenate(([0.0], np.cumsum(leg_len)))
        self._headings = np.arctan2(legs[:, 1], legs[:, 0]) % (2.0 * math.pi)
        self.speed = speed
        self.s = 0.0

    def advance(self, dt: float) -> None:
        self.s = min(self.s + self.speed * dt, float(self._cum[-1]))

    def position(self) -> tuple[float, float, float]:
        """(x, y, heading) at the current station."""
        x = float(np.interp(self.s, self._cum, self._path[:, 0]))
        y = float(np.interp(self.s, self._cum, self._path[:, 1]))
        leg = int(np.clip(np.searchsorted(self._cum, self.s, side="right") - 1,
                          0, len(self._headings) - 1))
        return x, y, float(self._headings[leg])


class TrafficEndpoint:
    """Endpoint A: drives the exchange and assembles the trace body."""

    def __init__(self, net: RoadNetwork3D, routes: list[Route], config: SyncConfig,
                 seed: int = 0, noise_std: float = 0.0):
        self.config = config
        self.routes = sorted(routes, key=lambda r: r.vehicle_id)
        self.movers = {r.vehicle_id: RouteMover(_route_path(net, r), r.speed)
                       for r in self.routes}
        self.noise_std = noise_std
        self.rng = np.random.default_rng(seed)

    def run(self, stream: MessageStream, steps: int):
        """Run the lockstep loop; returns (trace_lines, events)."""
        cfg = self.config
        stream.send(hello_message(cfg.dt, stream.framing))
        check_hello(stream.recv(), cfg.dt, stream.framing)

        clock = LockstepClock(0, cfg.dt)
        lines: list[str] = []
        events: list[SyncEvent] = []

        for k in range(steps):
            if clock.n != k:
                raise ProtocolViolation(f"clock skew: local n={clock.n}, loop step {k}")
            a_states: list[VehicleState] = []
            for route in self.routes:
                mover = self.movers[route.vehicle_id]
                mover.advance(cfg.dt)
                x, y, heading = mover.position()
                if self.noise_std > 0.0:
                    x += float(self.rng.normal(0.0, self.noise_std))
                    y += float(self.rng.normal(0.0, self.noise_std))
                a_states.append(VehicleState(route.vehicle_id, x, y, 0.0,
                                             route.speed, heading))

            clock = clock.advanced()
            stream.send({"type": "STEP", "n": k})
            stream.send({
                "type": "STATES",
                "n": k,
                "t": clock.t,
                "states": [s.to_wire() for s in a_states],
            })

            resyncs: dict[str, tuple[float, float]] = {}
            while True:
                msg = stream.recv()
                if msg["type"] == "RESYNC":
                    if msg.get("n") != k:
                        raise ProtocolViolation(
                            f"RESYNC for step {msg.get('n')!r} during step {k}"
                        )
                    resyncs[msg["vehicle_id"]] = (msg["x"], msg["y"])
                    continue
                expect(msg, "STATES")
                break
            if msg.get("n") != k:
                raise ProtocolViolation(
                    f"peer STATES at step {msg.get('n')!r}, expected {k}"
                )
            t_b = msg.get("t")
            if t_b != clock.t:
                raise ProtocolViolation(
                    f"peer clock {t_b!r} != local clock {clock.t!r} at step {k}"
                )
            b_states = {s["vehicle_id"]: VehicleState.from_wire(s)
                        for s in msg.get("states", [])}
            if set(b_states) != {s.vehicle_id for s in a_states}:
                raise ProtocolViolation("peer state set does not match vehicle set")

            step_no = k + 1
            lines.append(_dump({
                "record": "clock", "step": step_no, "t_a": clock.t, "t_b": t_b,
            }))
            for a in a_states:
                b = b_states[a.vehicle_id]
                err = sync_error(a, b)
                resynced = a.vehicle_id in resyncs
                if resynced != (err > cfg.resync_threshold):
                    raise ProtocolViolation(
                        f"step {step_no} vehicle {a.vehicle_id}: peer resync "
                        f"decision disagrees with sync error {err!r}"
                    )
                event = make_sync_event(step_no, a.vehicle_id, err, cfg.resync_threshold)
                events.append(event)
                record = {
                    "record": "vehicle",
                    "step": step_no,
                    "vehicle_id": a.vehicle_id,
                    "a": a.to_wire(),
                    "b": b.to_wire(),
                    "sync_error": err,
                    "action": event.action,
                }
                if resynced:
                    rx, ry = resyncs[a.vehicle_id]
                    record["resync_to"] = [rx, ry]
                lines.append(_dump(record))

        stream.send({"type": "BYE"})
        expect(stream.recv(), "BYE")
        return lines, events


class TerrainEndpoint:
    """Endpoint B: integrates its own motion, assigns z from the network,
    snaps to the authority on threshold crossings."""

    def __init__(self, net: RoadNetwork3D, routes: list[Route], config: SyncConfig,
                 drift_per_step: float = 0.0,
                 drift_direction: tuple[float, float] = (0.0, 1.0),
                 fault_at: int | None = None, fault_offset: float = 0.0):
        self.config = config
        self.routes = sorted(routes, key=lambda r: r.vehicle_id)
        self.movers = {r.vehicle_id: RouteMover(_route_path(net, r), r.speed)
                       for r in self.routes}
        self.locator = RoadLocator(net, config.snap_distance) if net.segments else None
        norm = math.hypot(*drift_direction)
        if norm == 0.0:
            raise ValueError("drift_direction must be non-zero")
        self._dir = (drift_direction[0] / norm, drift_direction[1] / norm)
        self.drift_per_step = drift_per_step
        self.fault_at = fault_at
        self.fault_offset = fault_offset
        self.offsets = {r.vehicle_id: [0.0, 0.0] for r in self.routes}

    def serve(self, stream: MessageStream) -> None:
        cfg = self.config
        check_hello(stream.recv(), cfg.dt, stream.framing)
        stream.send(hello_message(cfg.dt, stream.framing))

        clock = LockstepClock(0, cfg.dt)
        while True:
            msg = stream.recv()
            if msg["type"] == "BYE":
                stream.send({"type": "BYE"})
                return
            expect(msg, "STEP")
            if msg.get("n") != clock.n:
                raise ProtocolViolation(
                    f"peer stepped to {msg.get('n')!r} but local clock is {clock.n}"
                )
            states_msg = expect(stream.recv(), "STATES")
            if states_msg.get("n") != clock.n:
                raise ProtocolViolation(
                    f"peer STATES at {states_msg.get('n')!r}, expected {clock.n}"
                )
            a_states = {s["vehicle_id"]: VehicleState.from_wire(s)
                        for s in states_msg.get("states", [])}

            step_no = clock.n + 1
            clock = clock.advanced()

            b_states: list[VehicleState] = []
            snapped: list[tuple[str, float, float]] = []
            for route in self.routes:
                vid = route.vehicle_id
                mover = self.movers[vid]
                mover.advance(cfg.dt)
                mx, my, heading = mover.position()

                offset = self.offsets[vid]
                if self.drift_per_step != 0.0:
                    offset[0] += self.drift_per_step * self._dir[0]
                    offset[1] += self.drift_per_step * self._dir[1]
                if self.fault_at is not None and step_no == self.fault_at:
                    offset[0] += self.fault_offset * self._dir[0]
                    offset[1] += self.fault_offset * self._dir[1]

                bx = mx + offset[0]
                by = my + offset[1]
                z = self.locator.elevation(bx, by) if self.locator else 0.0
                b_states.append(VehicleState(vid, bx, by, z, route.speed, heading))

                a = a_states.get(vid)
                if a is None:
                    raise ProtocolViolation(f"authority sent no state for {vid!r}")
                err = sync_error(a, b_states[-1])
                if err > cfg.resync_threshold:
                    snapped.append((vid, a.x, a.y))
                    offset[0] = a.x - mx
                    offset[1] = a.y - my

            for vid, x, y in snapped:
                stream.send({"type": "RESYNC", "n": clock.n - 1,
                             "vehicle_id": vid, "x": x, "y": y})
            stream.send({
                "type": "STATES",
                "n": clock.n - 1,
                "t": clock.t,
                "states": [s.to_wire() for s in b_states],
            })


def _dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def run_scenario(
    net: RoadNetwork3D,
    routes: list[Route],
    config: SyncConfig = SyncConfig(),
    *,
    steps: int | None = None,
    seed: int = 0,
    noise_std: float = 0.0,
    drift_per_step: float = 0.0,
    drift_direction: tuple[float, float] = (0.0, 1.0),
    fault_at: int | None = None,
    fault_offset: float = 0.0,
    framing: str = "jsonl",
    transport: str = "inproc",
) -> dict:
    """Run a full lockstep scenario; returns trace text, summary, events.

    Deterministic: identical (network, routes, config, seed, knobs)
    give byte-identical traces.  ``transport`` is "inproc" (socketpair)
    or "tcp" (loopback socket); both use the same message code path.
    """
    if steps is None:
        steps = config.max_steps

    endpoint_a = TrafficEndpoint(net, routes, config, seed=seed, noise_std=noise_std)
    endpoint_b = TerrainEndpoint(net, routes, config,
                                 drift_per_step=drift_per_step,
                                 drift_direction=drift_direction,
                                 fault_at=fault_at, fault_offset=fault_offset)

    if transport == "inproc":
        sock_a, sock_b = socket.socketpair()
    elif transport == "tcp":
        listener = socket.create_server(("127.0.0.1", 0))
        port = listener.getsockname()[1]
        sock_a = socket.create_connection(("127.0.0.1", port))
        sock_b, _ = listener.accept()
        listener.close()
    else:
        raise ValueError(f"unknown transport {transport!r}")

    stream_a = MessageStream(sock_a, framing)
    stream_b = MessageStream(sock_b, framing)

    b_error: list[BaseException] = []

    def serve_b() -> None:
        try:
            endpoint_b.serve(stream_b)
        except BaseException as exc:  # noqa: BLE001 - repropagated below
            b_error.append(exc)
        finally:
            stream_b.close()

    thread = threading.Thread(target=serve_b, name="terrain-endpoint", daemon=True)
    thread.start()
    try:
        lines, events = endpoint_a.run(stream_a, steps)
    except ProtocolViolation:
        thread.join(timeout=5.0)
        if b_error:
            raise b_error[0] from None
        raise
    finally:
        stream_a.close()
    thread.join(timeout=5.0)
    if b_error:
        raise b_error[0]

    header = _dump({
        "record": "header",
        "schema": TRACE_SCHEMA,
        "dt": config.dt,
        "resync_threshold": config.resync_threshold,
        "snap_distance": config.snap_distance,
        "authority": "endpoint_a",
        "resync_action": "snap_to_authority",
        "framing": framing,
        "transport": transport,
        "seed": seed,
        "noise_std": noise_std,
        "drift_per_step": drift_per_step,
        "drift_direction": list(drift_direction),
        "fault_at": fault_at,
        "fault_offset": fault_offset,
        "vehicles": [r.vehicle_id for r in sorted(routes, key=lambda r: r.vehicle_id)],
        "steps": steps,
    })
    trace = "\n".join([header] + lines) + "\n"

    # Final clock values as observed in the exchange, not recomputed.
    t_final_a = 0.0
    t_final_b = 0.0
    for line in reversed(lines):
        rec = json.loads(line)
        if rec.get("record") == "clock":
            t_final_a = rec["t_a"]
            t_final_b = rec["t_b"]
            break

    resync_events = [e for e in events if e.action == "resync"]
    summary = {
        "schema": SUMMARY_SCHEMA,
        "steps": steps,
        "t_final_a": t_final_a,
        "t_final_b": t_final_b,
        "resync_count": len(resync_events),
        "resync_steps": [e.step for e in resync_events],
        "max_sync_error": max((e.sync_error for e in events), default=0.0),
        "vehicle_count": len(routes),
    }
    return {"trace": trace, "summary": summary, "events": events}
