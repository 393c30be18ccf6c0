"""Wire protocol between the two co-simulation endpoints.

Message types: HELLO{version, dt, framing}, STEP{n}, STATES{n, t,
states}, RESYNC{n, vehicle_id, x, y}, BYE.  Two byte framings carry the
same JSON payloads:

- ``jsonl``: each message is one line of compact JSON ending in ``\\n``.
- ``lp``: each message is a 4-byte big-endian unsigned payload length
  followed by exactly that many bytes of compact JSON.

JSON payloads always carry a ``type`` key and are encoded with sorted
keys, so identical messages are byte-identical.  The framing is
declared in HELLO and both sides must agree; a mismatch is a protocol
violation.
"""

from __future__ import annotations

import json
import math
import socket
import struct
from dataclasses import dataclass

PROTOCOL_VERSION = 1
FRAMINGS = ("jsonl", "lp")
MESSAGE_TYPES = ("HELLO", "STEP", "STATES", "RESYNC", "BYE")

_LP_HEADER = struct.Struct(">I")
_MAX_MESSAGE_BYTES = 16 * 1024 * 1024


class ProtocolViolation(RuntimeError):
    """Peer sent something the protocol does not allow here."""


@dataclass(frozen=True)
class VehicleState:
    vehicle_id: str
    x: float
    y: float
    z: float
    speed: float
    heading: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "speed", "heading"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{self.vehicle_id}: {name} must be finite")
        if self.speed < 0.0:
            raise ValueError(f"{self.vehicle_id}: speed must be >= 0")
        if not 0.0 <= self.heading < 2.0 * math.pi:
            raise ValueError(f"{self.vehicle_id}: heading must lie in [0, 2*pi)")

    def to_wire(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "x": self.x,
            "y": self.y,
            "z": self.z,
            "speed": self.speed,
            "heading": self.heading,
        }

    @classmethod
    def from_wire(cls, doc: dict) -> "VehicleState":
        try:
            return cls(doc["vehicle_id"], doc["x"], doc["y"], doc["z"],
                       doc["speed"], doc["heading"])
        except (KeyError, TypeError) as exc:
            raise ProtocolViolation(f"malformed vehicle state: {exc}") from exc


def encode_message(msg: dict, framing: str) -> bytes:
    payload = json.dumps(msg, sort_keys=True, separators=(",", ":")).encode()
    if framing == "jsonl":
        return payload + b"\n"
    if framing == "lp":
        return _LP_HEADER.pack(len(payload)) + payload
    raise ValueError(f"unknown framing {framing!r}")


class MessageStream:
    """Blocking message transport over a connected socket."""

    def __init__(self, sock: socket.socket, framing: str = "jsonl"):
        if framing not in FRAMINGS:
            raise ValueError(f"unknown framing {framing!r}; expected one of {FRAMINGS}")
        self.framing = framing
        self._sock = sock
        self._rfile = sock.makefile("rb")

    def send(self, msg: dict) -> None:
        if msg.get("type") not in MESSAGE_TYPES:
            raise ProtocolViolation(f"refusing to send unknown message type {msg.get('type')!r}")
        self._sock.sendall(encode_message(msg, self.framing))

    def _read_exact(self, count: int) -> bytes:
        chunks = []
        remaining = count
        while remaining > 0:
            chunk = self._rfile.read(remaining)
            if not chunk:
                raise ProtocolViolation("connection closed mid-message")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv(self) -> dict:
        if self.framing == "jsonl":
            line = self._rfile.readline()
            if not line:
                raise ProtocolViolation("connection closed")
            payload = line
        else:
            header = self._rfile.read(_LP_HEADER.size)
            if not header:
                raise ProtocolViolation("connection closed")
            if len(header) < _LP_HEADER.size:
                raise ProtocolViolation("connection closed mid-header")
            (length,) = _LP_HEADER.unpack(header)
            if length > _MAX_MESSAGE_BYTES:
                raise ProtocolViolation(f"message of {length} bytes exceeds limit")
            payload = self._read_exact(length)
        try:
            msg = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"payload is not valid JSON: {exc}") from exc
        if not isinstance(msg, dict) or msg.get("type") not in MESSAGE_TYPES:
            raise ProtocolViolation(f"unknown message type {msg!r}")
        return msg

    def close(self) -> None:
        try:
            self._rfile.close()
        finally:
            self._sock.close()


def hello_message(dt: float, framing: str) -> dict:
    return {"type": "HELLO", "version": PROTOCOL_VERSION, "dt": dt, "framing": framing}


def check_hello(msg: dict, dt: float, framing: str) -> None:
    """Validate a peer's HELLO against local expectations."""
    if msg.get("type") != "HELLO":
        raise ProtocolViolation(f"expected HELLO, got {msg.get('type')!r}")
    if msg.get("version") != PROTOCOL_VERSION:
        raise ProtocolViolation(
            f"protocol version mismatch: peer {msg.get('version')!r}, "
            f"local {PROTOCOL_VERSION}"
        )
    if msg.get("dt") != dt:
        raise ProtocolViolation(f"dt mismatch: peer {msg.get('dt')!r}, local {dt!r}")
    if msg.get("framing") != framing:
        raise ProtocolViolation(
            f"framing mismatch: peer {msg.get('framing')!r}, local {framing!r}"
        )


def expect(msg: dict, expected_type: str) -> dict:
    if msg.get("type") != expected_type:
        raise ProtocolViolation(f"expected {expected_type}, got {msg.get('type')!r}")
    return msg
