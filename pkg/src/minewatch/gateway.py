"""Base-station-to-server bridge: append-only time-stamped readings log.

The log is a CSV file, `timestamp,node,kind,value`, preceded by one
`#mode=` comment line recording whether timestamps are simulation
milliseconds or wall-clock ISO-8601 UTC. Values are rendered in
engineering units: temperature with one decimal, light as an integer
count, methane/oxygen as %vol with two decimals, CO as integer ppm.
"""

from __future__ import annotations

import datetime
import socketserver
import threading
from dataclasses import dataclass

from . import radio
from .radio import FrameKind
from .sensors import Reading, SensorKind, PERCENT_VOL_KINDS
from .simkernel import RoundReport
from .topology import BASE_ID

CSV_HEADER = "timestamp,node,kind,value"

_KIND_BY_LABEL = {k.value: k for k in SensorKind}


class LogWriteFailure(Exception):
    pass


def render_value(kind: SensorKind, value) -> str:
    if kind is SensorKind.TEMPERATURE:
        return f"{value:.1f}"
    if kind in PERCENT_VOL_KINDS:
        return f"{value / 100:.2f}"
    return str(int(value))


def parse_value(kind: SensorKind, text: str):
    if kind is SensorKind.TEMPERATURE:
        return float(text)
    if kind in PERCENT_VOL_KINDS:
        return round(float(text) * 100)
    return int(text)


@dataclass(frozen=True)
class LogRecord:
    timestamp: int | str  # sim-ms, or ISO-8601 UTC in live mode
    node: int
    kind: SensorKind
    value: float | int

    def to_csv_line(self) -> str:
        return f"{self.timestamp},{self.node},{self.kind.value}," \
               f"{render_value(self.kind, self.value)}"


def parse_csv_line(line: str) -> LogRecord:
    ts, node, kind_label, value = line.split(",")
    kind = _KIND_BY_LABEL[kind_label]
    timestamp = int(ts) if ts.lstrip("-").isdigit() else ts
    return LogRecord(timestamp, int(node), kind, parse_value(kind, value))


def parse_csv(text: str) -> list[LogRecord]:
    records = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line == CSV_HEADER:
            continue
        records.append(parse_csv_line(line))
    return records


class ReadingsLog:
    """Append-only log; single writer, snapshot-safe for readers.

    When a path is given, flushed records are durable and the on-disk file
    is a parseable CSV prefix of the in-memory log at every flush boundary.
    """

    def __init__(self, path=None, mode: str = "sim"):
        self.mode = mode
        self.records: list[LogRecord] = []
        self._seen: set[tuple[int, SensorKind, int]] = set()
        self._lock = threading.Lock()
        self._pending: list[LogRecord] = []
        self._file = None
        self.decode_errors = 0
        if path is not None:
            try:
                self._file = open(path, "w", newline="\n")
                self._file.write(f"#mode={mode}\n{CSV_HEADER}\n")
                self._file.flush()
            except OSError as e:
                raise LogWriteFailure(str(e)) from e

    def _stamp(self, reading: Reading):
        if self.mode == "live":
            return datetime.datetime.now(datetime.timezone.utc) \
                .isoformat(timespec="milliseconds")
        return reading.t

    def _append_reading(self, reading: Reading) -> LogRecord | None:
        key = (reading.node, reading.kind, reading.seq)
        if key in self._seen:
            return None
        self._seen.add(key)
        rec = LogRecord(self._stamp(reading), reading.node,
                        reading.kind, reading.value)
        self.records.append(rec)
        self._pending.append(rec)
        return rec

    def ingest_report(self, report: RoundReport) -> int:
        """Append every not-yet-seen reading of a round report."""
        with self._lock:
            count = sum(1 for r in report.readings_delivered
                        if self._append_reading(r) is not None)
        return count

    def ingest_frame_bytes(self, wire: bytes) -> int:
        """Decode one frame; only Data frames addressed to the base add
        records. Decode failures are counted, never fatal."""
        with self._lock:
            return self._ingest_frame_locked(wire)

    def _ingest_frame_locked(self, wire: bytes) -> int:
        try:
            frame = radio.decode(wire)
            if frame.kind is not FrameKind.DATA or frame.dest != BASE_ID:
                return 0
            readings = radio.decode_readings(frame.payload)
        except radio.RadioError:
            self.decode_errors += 1
            return 0
        return sum(1 for r in readings if self._append_reading(r) is not None)

    def ingest_wire_stream(self, data: bytes) -> int:
        """Parse a concatenation of WireBytes frames, resyncing on the next
        delimiter after anything malformed."""
        count = 0
        off = 0
        with self._lock:
            while off < len(data):
                if data[off] != radio.DELIMITER:
                    self.decode_errors += 1
                    nxt = data.find(bytes([radio.DELIMITER]), off + 1)
                    if nxt < 0:
                        break
                    off = nxt
                    continue
                if off + 3 > len(data):
                    self.decode_errors += 1
                    break
                length = int.from_bytes(data[off + 1:off + 3], "big")
                end = off + 3 + length + 1
                if end > len(data):
                    self.decode_errors += 1
                    break
                count += self._ingest_frame_locked(data[off:end])
                off = end
        return count

    def ingest_trace(self, trace: bytes) -> int:
        """Replay a simulator frame trace (u32 ms prefix per entry)."""
        from .simkernel import parse_trace
        count = 0
        for _, wire in parse_trace(trace):
            count += self.ingest_frame_bytes(wire)
        return count

    def flush(self) -> None:
        with self._lock:
            pending, self._pending = self._pending, []
            if self._file is None or not pending:
                return
            try:
                self._file.write("".join(r.to_csv_line() + "\n" for r in pending))
                self._file.flush()
            except OSError as e:
                raise LogWriteFailure(str(e)) from e

    def close(self) -> None:
        self.flush()
        if self._file is not None:
            self._file.close()
            self._file = None

    def snapshot(self) -> bytes:
        """The complete current log as CSV bytes (header + records)."""
        with self._lock:
            lines = [CSV_HEADER] + [r.to_csv_line() for r in self.records]
        return ("\n".join(lines) + "\n").encode()


class _IngestHandler(socketserver.BaseRequestHandler):
    def handle(self):
        buf = b""
        while True:
            chunk = self.request.recv(4096)
            if not chunk:
                break
            buf += chunk
            buf = self.server.feed(buf)


class GatewayIngestServer(socketserver.ThreadingTCPServer):
    """TCP listener accepting raw WireBytes streams, detached from the sim."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, log: ReadingsLog):
        super().__init__(addr, _IngestHandler)
        self.log = log

    def feed(self, buf: bytes) -> bytes:
        """Consume complete frames from buf; return the unconsumed tail."""
        off = 0
        while True:
            nxt = buf.find(bytes([radio.DELIMITER]), off)
            if nxt < 0:
                return b""
            off = nxt
            if off + 3 > len(buf):
                return buf[off:]
            length = int.from_bytes(buf[off + 1:off + 3], "big")
            end = off + 3 + length + 1
            if end > len(buf):
                return buf[off:]
            self.log.ingest_frame_bytes(buf[off:end])
            off = end
