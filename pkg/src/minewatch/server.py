"""Multi-client monitoring service.

One authoritative MonitorState holds the network, the readings log, the
alarm engine, and client sessions; every mutation goes through its lock, so
observable behavior is a total order of commands. Two frontends expose it:
a newline-delimited JSON TCP protocol (verbs LIST, SELECT, SUBSCRIBE, POLL,
SNAPSHOT, ACK) and an HTTP listener (/clusters, /select, /stream SSE,
/poll, /snapshot.csv, /alarms/{id}/ack) used by the web console.
"""

from __future__ import annotations

import itertools
import json
import queue
import socketserver
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .gateway import LogRecord, ReadingsLog
from .sensors import SensorKind, PERCENT_VOL_KINDS
from .topology import Network


class ServerError(Exception):
    pass


class NoNetworkLoaded(ServerError):
    pass


class UnknownCluster(ServerError):
    pass


class UnknownNode(ServerError):
    pass


class UnknownAlarm(ServerError):
    pass


class NotActive(ServerError):
    pass


class PollTimeout(ServerError):
    pass


def engineering_value(kind: SensorKind, stored) -> float:
    return stored / 100.0 if kind in PERCENT_VOL_KINDS else float(stored)


class AlarmDirection(Enum):
    HIGH = "high"
    LOW = "low"


class AlarmState(Enum):
    ACTIVE = "active"
    ACKNOWLEDGED = "acknowledged"
    CLEARED = "cleared"


@dataclass(frozen=True)
class AlarmRule:
    name: str
    kind: SensorKind
    direction: AlarmDirection
    trip: float  # engineering units
    clear: float
    consecutive: int = 2

    def __post_init__(self):
        if self.consecutive < 1:
            raise ValueError("consecutive must be >= 1")
        if self.direction is AlarmDirection.HIGH and not self.clear < self.trip:
            raise ValueError("high rule needs clear < trip")
        if self.direction is AlarmDirection.LOW and not self.clear > self.trip:
            raise ValueError("low rule needs clear > trip")

    def breaches(self, value: float) -> bool:
        if self.direction is AlarmDirection.HIGH:
            return value >= self.trip
        return value <= self.trip

    def clears(self, value: float) -> bool:
        if self.direction is AlarmDirection.HIGH:
            return value < self.clear
        return value > self.clear


@dataclass
class Alarm:
    id: int
    rule: AlarmRule
    node: int
    tripped_at: int | str
    state: AlarmState = AlarmState.ACTIVE
    ack_session: str | None = None
    ack_at: int | str | None = None

    def to_json(self) -> dict:
        return {"id": self.id, "rule": self.rule.name,
                "kind": self.rule.kind.value, "node": self.node,
                "tripped_at": self.tripped_at, "state": self.state.value,
                "ack_session": self.ack_session, "ack_at": self.ack_at}


@dataclass(frozen=True)
class AlarmTransition:
    event: str  # "tripped" | "acknowledged" | "cleared"
    alarm: Alarm


class AlarmEngine:
    """Threshold-with-hysteresis evaluation, one state machine per
    (rule, node). Deterministic over any record stream."""

    def __init__(self, rules: list[AlarmRule]):
        self.rules = list(rules)
        self._streak: dict[tuple[str, int], int] = {}
        self._active: dict[tuple[str, int], Alarm] = {}
        self._alarms: dict[int, Alarm] = {}
        self._ids = itertools.count(1)

    def evaluate(self, record: LogRecord) -> list[AlarmTransition]:
        out = []
        value = engineering_value(record.kind, record.value)
        for rule in self.rules:
            if rule.kind is not record.kind:
                continue
            key = (rule.name, record.node)
            active = self._active.get(key)
            if active is not None:
                if rule.clears(value):
                    active.state = AlarmState.CLEARED
                    del self._active[key]
                    self._streak[key] = 0
                    out.append(AlarmTransition("cleared", replace(active)))
                continue
            if rule.breaches(value):
                streak = self._streak.get(key, 0) + 1
                self._streak[key] = streak
                if streak >= rule.consecutive:
                    alarm = Alarm(next(self._ids), rule, record.node,
                                  record.timestamp)
                    self._active[key] = alarm
                    self._alarms[alarm.id] = alarm
                    self._streak[key] = 0
                    out.append(AlarmTransition("tripped", replace(alarm)))
            else:
                self._streak[key] = 0
        return out

    def ack(self, alarm_id: int, session: str, at) -> Alarm:
        alarm = self._alarms.get(alarm_id)
        if alarm is None:
            raise UnknownAlarm(f"no alarm {alarm_id}")
        if alarm.state is not AlarmState.ACTIVE:
            raise NotActive(f"alarm {alarm_id} is {alarm.state.value}")
        alarm.state = AlarmState.ACKNOWLEDGED
        alarm.ack_session = session
        alarm.ack_at = at
        return alarm

    def alarms(self) -> list[Alarm]:
        return [self._alarms[i] for i in sorted(self._alarms)]


@dataclass
class ClientSession:
    session_id: str
    selected_cluster: int | None = None
    # (node | "*", kind | "*") pairs
    subscriptions: set[tuple] = field(default_factory=set)
    events: "queue.Queue" = field(default_factory=queue.Queue)

    def wants(self, record: LogRecord, cluster_of) -> bool:
        if self.selected_cluster is not None \
                and cluster_of(record.node) != self.selected_cluster:
            return False
        for node, kind in self.subscriptions:
            if node in ("*", record.node) and kind in ("*", record.kind.value):
                return True
        return False


class MonitorState:
    """Authoritative server state; all access serialized by one lock."""

    def __init__(self, network: Network | None, log: ReadingsLog,
                 rules: list[AlarmRule], poller=None):
        self.network = network
        self.log = log
        self.engine = AlarmEngine(rules)
        self.poller = poller  # callable(node) -> list[Reading], raises on timeout
        self.lock = threading.RLock()
        self.sessions: dict[str, ClientSession] = {}
        self.live_heads: set[int] = set(network.heads()) if network else set()
        self._session_ids = itertools.count(1)

    # --- sessions -------------------------------------------------------
    def open_session(self) -> ClientSession:
        with self.lock:
            sid = f"s{next(self._session_ids)}"
            sess = ClientSession(sid)
            self.sessions[sid] = sess
            return sess

    def close_session(self, sid: str) -> None:
        with self.lock:
            self.sessions.pop(sid, None)

    # --- ingest path ----------------------------------------------------
    def publish(self, record: LogRecord) -> list[AlarmTransition]:
        """Evaluate alarms for one new record and fan it out to every
        in-scope subscriber, in arrival order."""
        with self.lock:
            transitions = self.engine.evaluate(record)
            cluster_of = self._cluster_of
            for sess in self.sessions.values():
                if sess.wants(record, cluster_of):
                    sess.events.put(("reading", record))
                for tr in transitions:
                    sess.events.put(("alarm", tr))
            return transitions

    def note_round(self, report) -> None:
        with self.lock:
            if self.network is not None:
                self.live_heads = {h for h in self.network.heads()
                                   if h not in report.nodes_missing}

    def _cluster_of(self, node: int) -> int | None:
        if self.network is None or node not in self.network.nodes:
            return None
        return self.network.nodes[node].cluster

    # --- commands -------------------------------------------------------
    def list_clusters(self) -> list[dict]:
        with self.lock:
            if self.network is None:
                raise NoNetworkLoaded("no network loaded")
            out = []
            for cid, members in sorted(self.network.cluster_members().items()):
                head = members[0]
                out.append({"cluster": cid, "head": head, "members": members,
                            "live": head in self.live_heads})
            return out

    def select_cluster(self, sid: str, cluster: int | None) -> None:
        with self.lock:
            if cluster is not None:
                if self.network is None:
                    raise NoNetworkLoaded("no network loaded")
                if cluster not in self.network.cluster_members():
                    raise UnknownCluster(f"no cluster {cluster}")
            self.sessions[sid].selected_cluster = cluster

    def subscribe(self, sid: str, node, kind) -> None:
        with self.lock:
            if node != "*":
                node = int(node)
                if self.network is not None and node not in self.network.nodes:
                    raise UnknownNode(f"no node {node}")
            self.sessions[sid].subscriptions.add((node, kind))

    def poll_node(self, node: int) -> list[dict]:
        with self.lock:
            if self.network is not None and node not in self.network.nodes:
                raise UnknownNode(f"no node {node}")
            poller = self.poller
        if poller is None:
            raise PollTimeout("no live simulator attached")
        readings = poller(node)  # may raise PollTimeout
        return [{"t": r.t, "node": r.node, "kind": r.kind.value,
                 "value": r.value, "seq": r.seq} for r in readings]

    def snapshot(self) -> bytes:
        return self.log.snapshot()

    def ack_alarm(self, sid: str, alarm_id: int):
        with self.lock:
            alarm = self.engine.ack(alarm_id, sid, self._now_stamp())
            tr = AlarmTransition("acknowledged", replace(alarm))
            for sess in self.sessions.values():
                sess.events.put(("alarm", tr))
            return alarm

    def alarms(self) -> list[dict]:
        with self.lock:
            return [a.to_json() for a in self.engine.alarms()]

    def _now_stamp(self):
        recs = self.log.records
        return recs[-1].timestamp if recs else 0


def record_json(record: LogRecord) -> dict:
    return {"t": record.timestamp, "node": record.node,
            "kind": record.kind.value, "value": record.value}


# --- TCP line protocol ----------------------------------------------------

class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self):
        state: MonitorState = self.server.state
        sess = state.open_session()
        write_lock = threading.Lock()
        stop = threading.Event()

        def send(obj):
            with write_lock:
                self.wfile.write((json.dumps(obj) + "\n").encode())
                self.wfile.flush()

        def pump_events():
            while not stop.is_set():
                try:
                    kind, payload = sess.events.get(timeout=0.1)
                except queue.Empty:
                    continue
                try:
                    if kind == "reading":
                        send({"event": "reading", **record_json(payload)})
                    else:
                        send({"event": "alarm", "transition": payload.event,
                              "alarm": payload.alarm.to_json()})
                except OSError:
                    break

        pump = threading.Thread(target=pump_events, daemon=True)
        pump.start()
        try:
            send({"event": "hello", "session": sess.session_id})
            for raw in self.rfile:
                line = raw.strip()
                if not line:
                    continue
                try:
                    send(self._dispatch(state, sess, json.loads(line)))
                except ServerError as e:
                    send({"ok": False, "error": type(e).__name__, "message": str(e)})
                except (ValueError, KeyError) as e:
                    send({"ok": False, "error": "BadRequest", "message": str(e)})
        except OSError:
            pass
        finally:
            stop.set()
            pump.join()
            state.close_session(sess.session_id)

    def _dispatch(self, state, sess, msg) -> dict:
        verb = msg.get("verb", "").upper()
        if verb == "LIST":
            return {"ok": True, "clusters": state.list_clusters()}
        if verb == "SELECT":
            state.select_cluster(sess.session_id, msg.get("cluster"))
            return {"ok": True, "selected": msg.get("cluster")}
        if verb == "SUBSCRIBE":
            state.subscribe(sess.session_id, msg.get("node", "*"),
                            msg.get("kind", "*"))
            return {"ok": True}
        if verb == "POLL":
            return {"ok": True, "readings": state.poll_node(int(msg["node"]))}
        if verb == "SNAPSHOT":
            return {"ok": True, "csv": state.snapshot().decode()}
        if verb == "ACK":
            alarm = state.ack_alarm(sess.session_id, int(msg["alarm"]))
            return {"ok": True, "alarm": alarm.to_json()}
        raise ValueError(f"unknown verb {verb!r}")


class LineProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, state: MonitorState):
        super().__init__(addr, _LineHandler)
        self.state = state


# --- HTTP + SSE frontend --------------------------------------------------

class _HttpHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    @property
    def state(self) -> MonitorState:
        return self.server.state

    def _json(self, code: int, obj) -> None:
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        n = int(self.headers.get("Content-Length") or 0)
        return json.loads(self.rfile.read(n) or b"{}")

    def do_GET(self):
        path, _, query = self.path.partition("?")
        params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
        if path == "/clusters":
            try:
                self._json(200, self.state.list_clusters())
            except NoNetworkLoaded as e:
                self._json(409, {"error": "NoNetworkLoaded", "message": str(e)})
        elif path == "/snapshot.csv":
            body = self.state.snapshot()
            self.send_response(200)
            self.send_header("Content-Type", "text/csv")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)
        elif path == "/alarms":
            self._json(200, self.state.alarms())
        elif path == "/stream":
            self._stream(params)
        else:
            self._static(path)

    def do_POST(self):
        path = self.path.partition("?")[0]
        try:
            if path == "/select":
                body = self._read_body()
                sess = self._http_session(body.get("session"))
                self.state.select_cluster(sess.session_id, body.get("cluster"))
                self._json(200, {"ok": True, "session": sess.session_id})
            elif path == "/poll":
                body = self._read_body()
                readings = self.state.poll_node(int(body["node"]))
                self._json(200, {"ok": True, "readings": readings})
            elif path.startswith("/alarms/") and path.endswith("/ack"):
                alarm_id = int(path.split("/")[2])
                body = self._read_body()
                sid = body.get("session", "http")
                alarm = self.state.ack_alarm(sid, alarm_id)
                self._json(200, {"ok": True, "alarm": alarm.to_json()})
            else:
                self._json(404, {"error": "NotFound"})
        except PollTimeout as e:
            self._json(504, {"error": "Timeout", "message": str(e)})
        except (UnknownNode, UnknownCluster, UnknownAlarm) as e:
            self._json(404, {"error": type(e).__name__, "message": str(e)})
        except NotActive as e:
            self._json(409, {"error": "NotActive", "message": str(e)})
        except (ValueError, KeyError) as e:
            self._json(400, {"error": "BadRequest", "message": str(e)})

    def _http_session(self, sid) -> ClientSession:
        state = self.state
        with state.lock:
            if sid and sid in state.sessions:
                return state.sessions[sid]
        return state.open_session()

    def _stream(self, params: dict) -> None:
        state = self.state
        sess = self._http_session(params.get("session"))
        if "cluster" in params:
            state.select_cluster(sess.session_id, int(params["cluster"]))
        node = params.get("node", "*")
        kind = params.get("kind", "*")
        state.subscribe(sess.session_id, node, kind)

        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            self.wfile.write(
                f"event: hello\ndata: {json.dumps({'session': sess.session_id})}\n\n"
                .encode())
            self.wfile.flush()
            while True:
                try:
                    evkind, payload = sess.events.get(timeout=0.25)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                if evkind == "reading":
                    data = json.dumps(record_json(payload))
                    self.wfile.write(f"data: {data}\n\n".encode())
                else:
                    data = json.dumps({"transition": payload.event,
                                       "alarm": payload.alarm.to_json()})
                    self.wfile.write(f"event: alarm\ndata: {data}\n\n".encode())
                self.wfile.flush()
        except OSError:
            pass
        finally:
            state.close_session(sess.session_id)

    def _static(self, path: str) -> None:
        root = self.server.static_root
        if root is None:
            self._json(404, {"error": "NotFound"})
            return
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._json(404, {"error": "NotFound"})
            return
        types = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".map": "application/json"}
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class HttpFrontend(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, state: MonitorState, static_root: Path | None = None):
        super().__init__(addr, _HttpHandler)
        self.state = state
        self.static_root = static_root
