"""Message gateway between the probe (simulated or a serial text stream) and
any number of clients.

Transport is newline-delimited JSON over TCP. A browser client may instead
open the same port with an HTTP upgrade request to /stream; the gateway
speaks just enough of the websocket framing protocol to serve it. One
serializer task assigns sequence numbers and appends every message to the
session log, so the log is a total order and a replay of its drive commands
regenerates the identical stream.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import struct
import time
from dataclasses import dataclass
from pathlib import Path

from .labels import LABELS
from .sim import DriveCommand, ProbeState, Simulator, TickResult
from .telemetry import (
    ParseError,
    PredictionBlock,
    SensorFrame,
    SurvivabilityReport,
    _GAS_RE,
    _PRED_HEADER,
    _TS_PREFIX,
    parse_prediction_block,
    parse_sensor_block,
    survivability,
)

MAX_LINE_BYTES = 65536
MESSAGE_TYPES = ("telemetry", "prediction", "survivability", "drive", "pose", "log", "error")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class MessageFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    type: str
    seq: int
    timestamp_ms: int
    data: dict

    def __post_init__(self):
        if self.type not in MESSAGE_TYPES:
            raise MessageFormatError(f"unknown message type {self.type!r}")


def encode(msg: Message) -> str:
    """One JSON object on one line, keys sorted so encoding is canonical."""
    obj = {"type": msg.type, "seq": msg.seq, "timestamp_ms": msg.timestamp_ms}
    obj.update(msg.data)
    line = json.dumps(obj, separators=(",", ":"), sort_keys=True, allow_nan=False)
    if len(line.encode()) > MAX_LINE_BYTES:
        raise MessageFormatError(f"encoded message exceeds {MAX_LINE_BYTES} bytes")
    return line


_VALIDATORS = {
    "telemetry": {"gas": (int,), "temp_c": (int, float), "humidity_pct": (int, float), "pressure_kpa": (int, float)},
    "prediction": {"dsp_ms": (int,), "classification_ms": (int,), "anomaly_ms": (int,), "probabilities": (dict,)},
    "survivability": {"air": (str,), "thermal": (str,), "overall": (str,)},
    "drive": {"direction": (str,), "magnitude": (int, float)},
    "pose": {"x_m": (int, float), "y_m": (int, float), "heading_rad": (int, float)},
    "log": {"level": (str,), "text": (str,)},
    "error": {"code": (str,), "text": (str,)},
}


def decode(line: str) -> Message:
    if len(line.encode()) > MAX_LINE_BYTES:
        raise MessageFormatError(f"line exceeds {MAX_LINE_BYTES} bytes")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as err:
        raise MessageFormatError(f"malformed JSON: {err}") from None
    if not isinstance(obj, dict):
        raise MessageFormatError("message must be a JSON object")
    mtype = obj.pop("type", None)
    if mtype not in MESSAGE_TYPES:
        raise MessageFormatError(f"unknown message type {mtype!r}")
    seq = obj.pop("seq", 0)
    ts = obj.pop("timestamp_ms", 0)
    if not isinstance(seq, int) or not isinstance(ts, int) or seq < 0:
        raise MessageFormatError("seq and timestamp_ms must be non-negative integers")
    for field, types in _VALIDATORS[mtype].items():
        if field not in obj:
            raise MessageFormatError(f"{mtype} message missing field {field!r}")
        if not isinstance(obj[field], types) or isinstance(obj[field], bool):
            raise MessageFormatError(f"{mtype} field {field!r} has wrong type")
    return Message(mtype, seq, ts, obj)


# ------------------------------------------------- payload <-> domain objects


def telemetry_data(frame: SensorFrame) -> dict:
    return {
        "gas": frame.gas_raw,
        "temp_c": frame.temp_c,
        "humidity_pct": frame.humidity_pct,
        "pressure_kpa": frame.pressure_kpa,
    }


def frame_from_data(data: dict, timestamp_ms: int = 0) -> SensorFrame:
    return SensorFrame(data["gas"], data["temp_c"], data["humidity_pct"], data["pressure_kpa"], timestamp_ms)


def prediction_data(block: PredictionBlock, decision: str | None = None) -> dict:
    return {
        "dsp_ms": block.dsp_ms,
        "classification_ms": block.classification_ms,
        "anomaly_ms": block.anomaly_ms,
        "probabilities": {lbl: p for lbl, p in zip(LABELS, block.probabilities)},
        "decision": decision,
    }


def block_from_data(data: dict) -> PredictionBlock:
    probs = data["probabilities"]
    missing = [lbl for lbl in LABELS if lbl not in probs]
    if missing:
        raise MessageFormatError(f"prediction missing probability for {missing[0]!r}")
    return PredictionBlock(
        data["dsp_ms"], data["classification_ms"], data["anomaly_ms"], tuple(probs[lbl] for lbl in LABELS)
    )


def survivability_data(report: SurvivabilityReport) -> dict:
    return {"air": report.air, "thermal": report.thermal, "overall": report.overall,
            "rationale": list(report.rationale)}


def drive_data(cmd: DriveCommand) -> dict:
    return {"direction": cmd.direction, "magnitude": cmd.magnitude}


def drive_from_data(data: dict) -> DriveCommand:
    try:
        return DriveCommand(data["direction"], float(data["magnitude"]))
    except ValueError as err:
        raise MessageFormatError(str(err)) from None


def pose_data(state: ProbeState) -> dict:
    return {"x_m": state.x_m, "y_m": state.y_m, "heading_rad": state.heading_rad}


# ------------------------------------------------------------- probe sources


class SimSource:
    """Drives a Simulator tick loop and emits its stream into the gateway.

    tick_interval_s is the wall-clock pacing; 0 runs the loop flat out
    (tests, replay). The per-tick burst is submitted without awaits in
    between so drive commands can only land between bursts, never inside
    one; that is what keeps the log replayable.
    """

    def __init__(self, simulator: Simulator, n_ticks: int | None = None, tick_interval_s: float | None = None):
        self.sim = simulator
        self.n_ticks = n_ticks
        self.tick_interval_s = simulator.tick_seconds if tick_interval_s is None else tick_interval_s

    def handle_drive(self, cmd: DriveCommand) -> None:
        self.sim.queue_command(cmd)

    def _emit_tick(self, gateway: "Gateway", result: TickResult) -> None:
        ts = result.frame.timestamp_ms
        gateway.submit("pose", pose_data(result.state), ts)
        gateway.submit("telemetry", telemetry_data(result.frame), ts)
        if result.prediction is not None:
            gateway.submit("prediction", prediction_data(result.prediction, result.decision), ts)

    async def run(self, gateway: "Gateway") -> None:
        i = 0
        while self.n_ticks is None or i < self.n_ticks:
            self._emit_tick(gateway, self.sim.step())
            i += 1
            await asyncio.sleep(self.tick_interval_s)


class ReplaySource(SimSource):
    """Re-runs a recorded drive schedule: {tick_index: [DriveCommand, ...]}."""

    def __init__(self, simulator: Simulator, schedule: dict, n_ticks: int):
        super().__init__(simulator, n_ticks, tick_interval_s=0.0)
        self.schedule = schedule

    async def run(self, gateway: "Gateway") -> None:
        for i in range(self.n_ticks):
            for cmd in self.schedule.get(i, []):
                gateway.ingest_drive(cmd)
            self._emit_tick(gateway, self.sim.step())
            await asyncio.sleep(0)


class SerialBlockSplitter:
    """Incremental splitter for the probe firmware's serial text stream."""

    MAX_BLOCK_LINES = 40

    def __init__(self):
        self._mode = None
        self._buf: list[str] = []
        self._dashes = 0

    def feed(self, line: str) -> list[tuple[str, object]]:
        events: list[tuple[str, object]] = []
        if self._mode is None:
            if _PRED_HEADER.search(line):
                self._mode, self._buf = "prediction", [line]
            elif _GAS_RE.search(line):
                self._mode, self._buf, self._dashes = "sensors", [line], 0
            return events
        self._buf.append(line)
        if self._mode == "prediction":
            try:
                events.append(("prediction", parse_prediction_block("\n".join(self._buf))))
                self._reset()
            except ParseError:
                if len(self._buf) > self.MAX_BLOCK_LINES:
                    self._reset()
        else:
            if _TS_PREFIX.sub("", line).strip().startswith("-----"):
                self._dashes += 1
            if self._dashes >= 2:
                try:
                    events.append(("frame", parse_sensor_block("\n".join(self._buf))))
                except ParseError:
                    pass
                self._reset()
            elif len(self._buf) > self.MAX_BLOCK_LINES:
                self._reset()
        return events

    def _reset(self):
        self._mode, self._buf, self._dashes = None, [], 0


class SerialSource:
    """Parses a serial text stream (same formats as the codec fixtures)."""

    def __init__(self, reader: asyncio.StreamReader, clock=None):
        self.reader = reader
        self.clock = clock if clock is not None else (lambda: int(time.time() * 1000))

    def handle_drive(self, cmd: DriveCommand) -> None:
        pass  # a passive serial tap has no drive channel

    async def run(self, gateway: "Gateway") -> None:
        splitter = SerialBlockSplitter()
        while True:
            raw = await self.reader.readline()
            if not raw:
                return
            for kind, obj in splitter.feed(raw.decode("utf-8", errors="replace").rstrip("\r\n")):
                ts = self.clock()
                if kind == "frame":
                    gateway.submit("telemetry", telemetry_data(obj), ts)
                else:
                    gateway.submit("prediction", prediction_data(obj), ts)


# ------------------------------------------------------------------- gateway


class _Client:
    def __init__(self, writer: asyncio.StreamWriter, websocket: bool):
        self.writer = writer
        self.websocket = websocket
        self.outbox: asyncio.Queue = asyncio.Queue()


class Gateway:
    SNIFF_TIMEOUT_S = 0.25

    def __init__(self, source, log_path=None):
        self.source = source
        self.log_path = Path(log_path) if log_path is not None else None
        self.session_lines: list[str] = []
        self._queue: asyncio.Queue = asyncio.Queue()
        self._clients: set[_Client] = set()
        self._seq = 0
        self._last_ts = 0
        self._closed = asyncio.Event()
        self._log_file = None

    # -- message intake (synchronous: a burst enqueues atomically) ----------

    def submit(self, mtype: str, data: dict, timestamp_ms: int) -> None:
        self._last_ts = timestamp_ms
        self._queue.put_nowait((mtype, data, timestamp_ms))

    def ingest_drive(self, cmd: DriveCommand) -> None:
        """Client drive command: logged in stream order, then queued to the probe."""
        self._queue.put_nowait(("drive", drive_data(cmd), self._last_ts))
        self.source.handle_drive(cmd)

    # -- serializer ----------------------------------------------------------

    def _emit(self, mtype: str, data: dict, timestamp_ms: int) -> None:
        msg = Message(mtype, self._seq, timestamp_ms, data)
        self._seq += 1
        line = encode(msg)
        self.session_lines.append(line)
        if self._log_file is not None:
            self._log_file.write(line + "\n")
            self._log_file.flush()
        for client in list(self._clients):
            client.outbox.put_nowait(line)

    async def _serialize_loop(self) -> None:
        while True:
            item = await self._queue.get()
            if item is None:
                return
            mtype, data, ts = item
            self._emit(mtype, data, ts)
            if mtype == "telemetry":
                report = survivability(frame_from_data(data, ts))
                self._emit("survivability", survivability_data(report), ts)

    # -- client connections ---------------------------------------------------

    async def _client_writer(self, client: _Client) -> None:
        try:
            while True:
                line = await client.outbox.get()
                if line is None:
                    break
                if client.websocket:
                    client.writer.write(_ws_text_frame(line.encode()))
                else:
                    client.writer.write(line.encode() + b"\n")
                await client.writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass

    def _handle_client_line(self, client: _Client, line: str) -> None:
        try:
            msg = decode(line)
        except MessageFormatError as err:
            client.outbox.put_nowait(encode(Message("error", 0, self._last_ts, {"code": "bad_message", "text": str(err)})))
            return
        if msg.type != "drive":
            client.outbox.put_nowait(
                encode(Message("error", 0, self._last_ts,
                               {"code": "unsupported_type", "text": f"clients may only send drive, got {msg.type}"}))
            )
            return
        try:
            self.ingest_drive(drive_from_data(msg.data))
        except MessageFormatError as err:
            client.outbox.put_nowait(encode(Message("error", 0, self._last_ts, {"code": "bad_drive", "text": str(err)})))

    async def _handle_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        # sniff the first bytes to tell a WebSocket upgrade from raw NDJSON;
        # a silent reader identifies itself by sending nothing, so time out
        # quickly and treat it as an NDJSON subscriber
        try:
            first = await asyncio.wait_for(reader.read(4), timeout=self.SNIFF_TIMEOUT_S)
        except asyncio.TimeoutError:
            first = b""
        except ConnectionError:
            writer.close()
            return
        try:
            if first == b"GET ":
                ok = await self._websocket_handshake(reader, writer)
                if not ok:
                    writer.close()
                    return
                client = _Client(writer, websocket=True)
            else:
                client = _Client(writer, websocket=False)
        except (ConnectionError, asyncio.IncompleteReadError):
            writer.close()
            return
        self._clients.add(client)
        writer_task = asyncio.create_task(self._client_writer(client))
        try:
            if client.websocket:
                await self._read_websocket(client, reader)
            else:
                await self._read_ndjson(client, reader, first)
        except (ConnectionError, asyncio.IncompleteReadError, asyncio.LimitOverrunError):
            pass
        finally:
            self._clients.discard(client)
            client.outbox.put_nowait(None)
            await writer_task
            writer.close()

    async def _read_ndjson(self, client: _Client, reader: asyncio.StreamReader, first: bytes) -> None:
        pending = first
        while True:
            chunk = await reader.readline()
            if not chunk:
                return
            buf = pending + chunk
            pending = b""
            if not buf.endswith(b"\n"):
                return  # EOF mid-line
            line = buf.decode("utf-8", errors="replace").rstrip("\r\n")
            if line:
                self._handle_client_line(client, line)

    async def _websocket_handshake(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> bool:
        header = await reader.readuntil(b"\r\n\r\n")
        request = (b"GET " + header).decode("latin-1")
        lines = request.split("\r\n")
        path = lines[0].split(" ")[1] if len(lines[0].split(" ")) > 1 else "/"
        fields = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            fields[name.strip().lower()] = value.strip()
        if path.split("?")[0] != "/stream":
            writer.write(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")
            await writer.drain()
            return False
        key = fields.get("sec-websocket-key")
        if "websocket" not in fields.get("upgrade", "").lower() or not key:
            writer.write(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n")
            await writer.drain()
            return False
        accept = base64.b64encode(hashlib.sha1((key + _WS_GUID).encode()).digest()).decode()
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode()
        )
        await writer.drain()
        return True

    async def _read_websocket(self, client: _Client, reader: asyncio.StreamReader) -> None:
        while True:
            frame = await _ws_read_frame(reader)
            if frame is None:
                return
            opcode, payload = frame
            if opcode == 0x8:  # close
                client.writer.write(_ws_frame(0x8, payload[:2]))
                await client.writer.drain()
                return
            if opcode == 0x9:  # ping
                client.writer.write(_ws_frame(0xA, payload))
                await client.writer.drain()
                continue
            if opcode in (0x1, 0x2):
                for line in payload.decode("utf-8", errors="replace").splitlines():
                    if line.strip():
                        self._handle_client_line(client, line.strip())

    # -- lifecycle -------------------------------------------------------------

    async def run(self, host: str = "127.0.0.1", port: int | None = 8765) -> None:
        """Serve until the probe source ends, then broadcast the error and stop.

        port=None pumps the source without listening (offline replay).
        """
        if self.log_path is not None:
            self._log_file = open(self.log_path, "a")
        server = await asyncio.start_server(self._handle_conn, host, port) if port is not None else None
        serializer = asyncio.create_task(self._serialize_loop())
        try:
            await self.source.run(self)
            self.submit("error", {"code": "source_disconnect", "text": "probe source ended"}, self._last_ts)
            self._queue.put_nowait(None)
            await serializer
            for client in list(self._clients):
                client.outbox.put_nowait(None)
            await asyncio.sleep(0.05)  # let writers flush
        finally:
            serializer.cancel()
            if server is not None:
                server.close()
                await server.wait_closed()
            for client in list(self._clients):
                try:
                    client.writer.close()
                except Exception:
                    pass
            if self._log_file is not None:
                self._log_file.close()
                self._log_file = None
            self._closed.set()


# ------------------------------------------------------------------ replay


def drive_schedule_from_log(lines) -> tuple[dict, int]:
    """Rebuild {tick_index: [commands]} from a session log; also tick count."""
    schedule: dict[int, list[DriveCommand]] = {}
    ticks = 0
    for line in lines:
        line = line.strip()
        if not line:
            continue
        msg = decode(line)
        if msg.type == "telemetry":
            ticks += 1
        elif msg.type == "drive":
            schedule.setdefault(ticks, []).append(drive_from_data(msg.data))
    return schedule, ticks


def replay_session(lines, rubble_map, pipeline, seed: int, start: ProbeState | None = None) -> list[str]:
    """Regenerate a session's log from its recorded drive commands."""
    schedule, ticks = drive_schedule_from_log(lines)
    sim = Simulator(rubble_map, pipeline, seed, start)
    gateway = Gateway(ReplaySource(sim, schedule, ticks))
    asyncio.run(gateway.run(port=None))
    return gateway.session_lines


# --------------------------------------------------------------- ws framing


def _ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _ws_text_frame(payload: bytes) -> bytes:
    return _ws_frame(0x1, payload)


async def _ws_read_frame(reader: asyncio.StreamReader):
    try:
        b0, b1 = await reader.readexactly(2)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", await reader.readexactly(2))
    elif n == 127:
        (n,) = struct.unpack(">Q", await reader.readexactly(8))
    if n > MAX_LINE_BYTES:
        return None
    mask = await reader.readexactly(4) if masked else b""
    payload = await reader.readexactly(n)
    if masked:
        payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
    return opcode, payload
