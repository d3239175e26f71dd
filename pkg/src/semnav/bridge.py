"""NDJSON-over-TCP control link for external simulators.

Protocol v1, default port 7787, one complete JSON object per line.  A
session starts with a hello that fixes the map geometry, after which
frame messages patch the session's cost map (through the keyframe gate
when a model is configured) and every state message gets exactly one
command reply.  Any violation earns an error message and the connection
is closed; the server then waits for the next client.

    -> {"type":"hello","version":"1","width":W,"height":H,
        "resolution":R,"origin":[ox,oy]}        <- {"type":"hello","version":"1"}
    -> {"type":"frame","t":s,"cx":c,"cy":c,"w":n,"h":n,"labels":[...]}
    -> {"type":"state","t":s,"x":m,"y":m,"theta":r,"v":mps,
        "omega":radps,"goal":[gx,gy]}           <- {"type":"command","t":s,"v":..,
                                                    "omega":..,"recovery":b}
    -> {"type":"bye"}                           <- connection close

Unknown fields in otherwise valid messages are ignored.  Session cells
start at label 22 (worst-case cost) until frames cover them.  The
mission clock for the cost decay is taken from the state messages' t
field, so decayed costs follow the client's timeline.
"""

from __future__ import annotations

import json
import logging
import socket
import threading

import numpy as np

from .costmap import CostMap, LabelCostTable, MAX_LABEL, Occupancy, SemanticMap, patch_update
from .errors import ProtocolError
from .nn import KeyframeModel, keyframe_decide
from .planner import PlannerConfig, UavState, select_velocity

log = logging.getLogger("semnav.bridge")

PROTOCOL_VERSION = "1"
DEFAULT_PORT = 7787
MAX_LINE_BYTES = 1 << 20

MESSAGE_TYPES = ("hello", "frame", "state", "command", "bye", "error")


def encode_message(msg: dict) -> bytes:
    """One compact JSON line, newline-terminated."""
    return (json.dumps(msg, separators=(",", ":")) + "\n").encode("utf-8")


def _field(payload: dict, name: str, kinds, msg_type: str):
    if name not in payload:
        raise ProtocolError(f"{msg_type} message is missing field {name!r}")
    value = payload[name]
    if kinds is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError(f"{msg_type} field {name!r} must be a number")
        return float(value)
    if kinds is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProtocolError(f"{msg_type} field {name!r} must be an integer")
        return value
    if kinds is str:
        if not isinstance(value, str):
            raise ProtocolError(f"{msg_type} field {name!r} must be a string")
        return value
    if kinds is bool:
        if not isinstance(value, bool):
            raise ProtocolError(f"{msg_type} field {name!r} must be a boolean")
        return value
    raise AssertionError(kinds)


def _pair(payload: dict, name: str, msg_type: str) -> list[float]:
    value = payload.get(name)
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
        raise ProtocolError(f"{msg_type} field {name!r} must be [x, y]")
    return [float(value[0]), float(value[1])]


def decode_line(line) -> dict:
    """Parse and validate one protocol line; returns only the canonical fields."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"line is not valid UTF-8: {exc}") from exc
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("message must be a JSON object")
    msg_type = payload.get("type")
    if msg_type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg_type!r}")

    if msg_type == "hello":
        width = _field(payload, "width", int, msg_type)
        height = _field(payload, "height", int, msg_type)
        resolution = _field(payload, "resolution", float, msg_type)
        if width < 1 or height < 1:
            raise ProtocolError(f"hello grid {width}x{height} is not positive")
        if not resolution > 0:
            raise ProtocolError("hello field 'resolution' must be positive")
        return {
            "type": "hello",
            "version": _field(payload, "version", str, msg_type),
            "width": width,
            "height": height,
            "resolution": resolution,
            "origin": _pair(payload, "origin", msg_type),
        }
    if msg_type == "frame":
        w = _field(payload, "w", int, msg_type)
        h = _field(payload, "h", int, msg_type)
        labels = payload.get("labels")
        if not isinstance(labels, list):
            raise ProtocolError("frame field 'labels' must be a list")
        if w < 1 or h < 1:
            raise ProtocolError(f"frame patch {w}x{h} is not positive")
        if len(labels) != w * h:
            raise ProtocolError(
                f"frame field 'labels' has {len(labels)} entries, expected w*h={w * h}"
            )
        for value in labels:
            if isinstance(value, bool) or not isinstance(value, int) \
                    or not 0 <= value <= MAX_LABEL:
                raise ProtocolError(
                    f"frame field 'labels' entry {value!r} is not a class id 0..{MAX_LABEL}"
                )
        return {
            "type": "frame",
            "t": _field(payload, "t", float, msg_type),
            "cx": _field(payload, "cx", int, msg_type),
            "cy": _field(payload, "cy", int, msg_type),
            "w": w,
            "h": h,
            "labels": list(labels),
        }
    if msg_type == "state":
        return {
            "type": "state",
            "t": _field(payload, "t", float, msg_type),
            "x": _field(payload, "x", float, msg_type),
            "y": _field(payload, "y", float, msg_type),
            "theta": _field(payload, "theta", float, msg_type),
            "v": _field(payload, "v", float, msg_type),
            "omega": _field(payload, "omega", float, msg_type),
            "goal": _pair(payload, "goal", msg_type),
        }
    if msg_type == "command":
        return {
            "type": "command",
            "t": _field(payload, "t", float, msg_type),
            "v": _field(payload, "v", float, msg_type),
            "omega": _field(payload, "omega", float, msg_type),
            "recovery": _field(payload, "recovery", bool, msg_type),
        }
    if msg_type == "error":
        return {"type": "error", "message": _field(payload, "message", str, msg_type)}
    return {"type": "bye"}


class BridgeSession:
    """The per-connection pipeline, usable offline (no sockets involved).

    handle() takes a decoded message and returns (reply or None, close
    flag); protocol violations raise ProtocolError.
    """

    def __init__(self, planner_cfg: PlannerConfig, obstacle_labels=frozenset(),
                 keyframe_model: KeyframeModel | None = None,
                 table: LabelCostTable | None = None):
        self.planner_cfg = planner_cfg
        self.obstacle_labels = frozenset(int(l) for l in obstacle_labels)
        self.keyframe_model = keyframe_model
        self.table = table or LabelCostTable.linear()
        self._labels: np.ndarray | None = None
        self._cm: CostMap | None = None
        self._occupancy: Occupancy | None = None
        self._resolution = 1.0
        self._origin = (0.0, 0.0)

    @property
    def negotiated(self) -> bool:
        return self._cm is not None

    def handle(self, msg: dict) -> tuple[dict | None, bool]:
        msg_type = msg["type"]
        if msg_type == "hello":
            return self._on_hello(msg), False
        if msg_type == "bye":
            return None, True
        if msg_type in ("command", "error"):
            raise ProtocolError(f"{msg_type} messages flow server to client only")
        if not self.negotiated:
            raise ProtocolError("handshake required")
        if msg_type == "frame":
            self._on_frame(msg)
            return None, False
        return self._on_state(msg), False

    def _on_hello(self, msg: dict) -> dict:
        if self.negotiated:
            raise ProtocolError("session already negotiated")
        if msg["version"] != PROTOCOL_VERSION:
            raise ProtocolError(
                f"unsupported protocol version {msg['version']!r}, server speaks "
                f"{PROTOCOL_VERSION!r}"
            )
        self._resolution = msg["resolution"]
        self._origin = (msg["origin"][0], msg["origin"][1])
        labels = np.full((msg["height"], msg["width"]), MAX_LABEL, dtype=np.uint8)
        self._labels = labels
        self._rebuild()
        return {"type": "hello", "version": PROTOCOL_VERSION}

    def _rebuild(self) -> None:
        sem = SemanticMap(labels=self._labels, resolution=self._resolution,
                          origin=self._origin)
        self._cm = CostMap(costs=self.table.costs[self._labels],
                           resolution=self._resolution, origin=self._origin)
        self._occupancy = Occupancy.from_semantic(sem, self.obstacle_labels)

    def _on_frame(self, msg: dict) -> None:
        patch_labels = np.asarray(msg["labels"], dtype=np.uint8).reshape(msg["h"], msg["w"])
        if self.keyframe_model is not None:
            _, keep = keyframe_decide(patch_labels / float(MAX_LABEL), self.keyframe_model)
            if not keep:
                return
        patch = SemanticMap(
            labels=patch_labels,
            resolution=self._resolution,
            origin=(self._origin[0] + msg["cx"] * self._resolution,
                    self._origin[1] + msg["cy"] * self._resolution),
        )
        result = patch_update(self._cm, patch, self.table)
        self._cm = result.costmap
        if result.overlapped:
            h, w = self._labels.shape
            c0, r0 = msg["cx"], msg["cy"]
            c_lo, c_hi = max(c0, 0), min(c0 + msg["w"], w)
            r_lo, r_hi = max(r0, 0), min(r0 + msg["h"], h)
            self._labels[r_lo:r_hi, c_lo:c_hi] = \
                patch_labels[r_lo - r0:r_hi - r0, c_lo - c0:c_hi - c0]
            self._rebuild_occupancy_only()

    def _rebuild_occupancy_only(self) -> None:
        sem = SemanticMap(labels=self._labels, resolution=self._resolution,
                          origin=self._origin)
        self._occupancy = Occupancy.from_semantic(sem, self.obstacle_labels)

    def _on_state(self, msg: dict) -> dict:
        state = UavState(x=msg["x"], y=msg["y"], theta=msg["theta"],
                         v=msg["v"], omega=msg["omega"])
        cand = select_velocity(
            state, (msg["goal"][0], msg["goal"][1]), self._cm, self._occupancy,
            self.planner_cfg.limits, self.planner_cfg.weights,
            d_max=self.planner_cfg.d_max, t_mission=msg["t"],
            decay_clock=self.planner_cfg.decay_clock,
        )
        return {"type": "command", "t": msg["t"], "v": cand.v,
                "omega": cand.omega, "recovery": cand.recovery}

    def handle_line(self, line) -> tuple[bytes | None, bool]:
        """Line-level entry point: decode, dispatch, encode."""
        reply, close = self.handle(decode_line(line))
        return (encode_message(reply) if reply is not None else None), close


class BridgeServer:
    """Serializes sessions over a listening TCP socket, one client at a time."""

    def __init__(self, planner_cfg: PlannerConfig, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, obstacle_labels=frozenset(),
                 keyframe_model: KeyframeModel | None = None,
                 table: LabelCostTable | None = None):
        self.planner_cfg = planner_cfg
        self.obstacle_labels = obstacle_labels
        self.keyframe_model = keyframe_model
        self.table = table
        self._stop = threading.Event()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(4)
        self._listener.settimeout(0.2)
        self.address = self._listener.getsockname()

    @property
    def port(self) -> int:
        return self.address[1]

    def shutdown(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self._listener.close()

    def serve_forever(self) -> None:
        log.info("bridge listening on %s:%d", self.address[0], self.address[1])
        try:
            while not self._stop.is_set():
                try:
                    conn, peer = self._listener.accept()
                except socket.timeout:
                    continue
                except OSError:
                    break
                log.info("client connected from %s:%d", peer[0], peer[1])
                try:
                    self._serve_client(conn)
                finally:
                    conn.close()
                    log.info("session closed")
        except KeyboardInterrupt:
            log.info("interrupted, shutting down")
        finally:
            self.close()

    def _serve_client(self, conn: socket.socket) -> None:
        session = BridgeSession(self.planner_cfg, self.obstacle_labels,
                                self.keyframe_model, self.table)
        conn.settimeout(0.2)
        buffer = b""
        while not self._stop.is_set():
            newline = buffer.find(b"\n")
            if newline < 0:
                if len(buffer) > MAX_LINE_BYTES:
                    self._send_error(conn, "line exceeds maximum length")
                    return
                try:
                    chunk = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    return
                if not chunk:
                    if buffer.strip():
                        # bytes after the last newline: truncated line
                        self._send_error(conn, "truncated line before EOF")
                    return
                buffer += chunk
                continue
            line, buffer = buffer[:newline], buffer[newline + 1:]
            if not line.strip():
                continue
            try:
                reply, close = session.handle_line(line)
            except ProtocolError as exc:
                self._send_error(conn, str(exc))
                return
            if reply is not None:
                try:
                    conn.sendall(reply)
                except OSError:
                    return
            if close:
                return

    @staticmethod
    def _send_error(conn: socket.socket, message: str) -> None:
        try:
            conn.sendall(encode_message({"type": "error", "message": message}))
        except OSError:
            pass


def serve(host: str, port: int, planner_cfg: PlannerConfig, obstacle_labels=frozenset(),
          keyframe_model: KeyframeModel | None = None,
          table: LabelCostTable | None = None) -> None:
    """Run a bridge server until interrupted."""
    server = BridgeServer(planner_cfg, host=host, port=port,
                          obstacle_labels=obstacle_labels,
                          keyframe_model=keyframe_model, table=table)
    server.serve_forever()
