"""Wires simulator, gateway, and server together for `minewatch serve` and
for end-to-end tests. The simulator stays single-threaded; server threads
reach it only through the harness poll lock.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

from .config import Scenario
from .gateway import ReadingsLog
from .sensors import SensorField
from .server import (HttpFrontend, LineProtocolServer, MonitorState,
                     PollTimeout)
from .simkernel import Simulator, Timeout
from .topology import build_topology


def build_simulator(scenario: Scenario):
    """Realize a scenario into a (Simulator, Network) pair."""
    network = build_topology(scenario.topology)
    sensor_field = SensorField(scenario.sensors, scenario.seed,
                               list(scenario.hazards))
    sim = Simulator(network, scenario.radio, sensor_field,
                    list(scenario.kinds), scenario.seed,
                    list(scenario.failures))
    return sim, network


class ServeHarness:
    """Embedded-simulator deployment: rounds feed the gateway log, records
    fan out to subscribed clients, operator polls are serialized with
    rounds."""

    def __init__(self, scenario: Scenario, log_path=None,
                 tcp_port: int = 0, http_port: int = 0,
                 static_root: Path | None = None, realtime: bool = False):
        self.scenario = scenario
        self.realtime = realtime
        self.log = ReadingsLog(log_path, mode="sim")
        self.sim, self.network = build_simulator(scenario)
        self._sim_lock = threading.Lock()
        self._published = 0
        self._current_t = 0
        self.state = MonitorState(self.network, self.log,
                                  list(scenario.alarm_rules),
                                  poller=self._poll)
        self.tcp = LineProtocolServer(("127.0.0.1", tcp_port), self.state)
        self.http = HttpFrontend(("127.0.0.1", http_port), self.state,
                                 static_root=static_root)
        self._threads = []
        self._sim_done = threading.Event()

    @property
    def tcp_port(self) -> int:
        return self.tcp.server_address[1]

    @property
    def http_port(self) -> int:
        return self.http.server_address[1]

    def _publish_new_records(self) -> None:
        while self._published < len(self.log.records):
            self.state.publish(self.log.records[self._published])
            self._published += 1

    def _on_report(self, report) -> None:
        self.log.ingest_report(report)
        self.log.flush()
        self.state.note_round(report)
        self._publish_new_records()
        self._current_t = report.t
        if self.realtime:
            time.sleep(self.scenario.interval_ms / 1000.0)

    def _poll(self, node: int):
        with self._sim_lock:
            try:
                readings = self.sim.poll_node(node, self._current_t + 1)
            except Timeout as e:
                raise PollTimeout(str(e)) from None
            # poll results are part of the record of what the operator saw
            for r in readings:
                with self.log._lock:
                    self.log._append_reading(r)
            self.log.flush()
            self._publish_new_records()
            return readings

    def _run_sim(self) -> None:
        interval = self.scenario.interval_ms
        duration = self.scenario.duration_ms
        at = 0
        idx = 0
        while at < duration:
            with self._sim_lock:
                report = self.sim.run_round(idx, at)
            self._on_report(report)
            idx += 1
            at += interval
        self._sim_done.set()

    def start(self, run_simulator: bool = True) -> None:
        for srv in (self.tcp, self.http):
            t = threading.Thread(target=srv.serve_forever, daemon=True)
            t.start()
            self._threads.append(t)
        if run_simulator:
            t = threading.Thread(target=self._run_sim, daemon=True)
            t.start()
            self._threads.append(t)
        else:
            self._sim_done.set()

    def wait_sim(self, timeout: float | None = None) -> bool:
        return self._sim_done.wait(timeout)

    def stop(self) -> None:
        self.tcp.shutdown()
        self.http.shutdown()
        self.tcp.server_close()
        self.http.server_close()
        self.log.close()
