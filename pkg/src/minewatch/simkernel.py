"""Deterministic discrete-event collection engine.

Each round, every live cluster head interrupt-calls (polls) its sub-nodes,
caches their replies, then forwards its aggregate along the data-flow path
to the base station. On a ring the aggregate is relayed head-to-head; relay
heads keep a copy of what passed through and re-send it with their own
aggregate, so the base sees duplicates and suppresses them by
(node, kind, seq).
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field

from . import radio
from .radio import Frame, FrameKind, Delivered, Dropped, RadioModel
from .sensors import Reading, SensorField, SensorKind, substream
from .topology import BASE_ID, Network, NodeRole, TopologyKind, failure_impact

POLL_ATTEMPTS = 2


class Timeout(Exception):
    pass


class SimClock:
    """Monotonic event queue; equal-time events run in insertion order."""

    def __init__(self):
        self.now = 0.0
        self._queue = []
        self._tie = 0

    def schedule(self, at_ms: float, fn) -> None:
        if at_ms < self.now:
            raise ValueError("cannot schedule in the past")
        heapq.heappush(self._queue, (at_ms, self._tie, fn))
        self._tie += 1

    def run_until_empty(self) -> None:
        while self._queue:
            at, _, fn = heapq.heappop(self._queue)
            self.now = at
            fn()


@dataclass
class NodeState:
    node: int
    latest: dict[SensorKind, Reading] = field(default_factory=dict)
    sub_cache: dict[int, list[Reading]] = field(default_factory=dict)


@dataclass
class RoundReport:
    round_index: int
    t: int
    readings_delivered: list[Reading]
    duplicates_suppressed: int
    nodes_missing: set[int]
    samples_taken: int


@dataclass
class SimResult:
    reports: list[RoundReport]
    trace: bytes


def serialize_trace_entry(t_ms: int, wire: bytes) -> bytes:
    return struct.pack(">I", t_ms & 0xFFFFFFFF) + wire


def parse_trace(data: bytes) -> list[tuple[int, bytes]]:
    """Split a trace back into (timestamp_ms, wire_bytes) entries."""
    entries = []
    off = 0
    while off < len(data):
        (t,) = struct.unpack(">I", data[off:off + 4])
        off += 4
        (length,) = struct.unpack(">H", data[off + 1:off + 3])
        frame_len = 3 + length + 1
        entries.append((t, data[off:off + frame_len]))
        off += frame_len
    return entries


class Simulator:
    """One deterministic run over a validated network."""

    def __init__(self, network: Network, radio_model: RadioModel,
                 sensor_field: SensorField, enabled_kinds: list[SensorKind],
                 seed: int, failures: list[tuple[int, int]] | None = None):
        self.network = network
        self.radio_model = radio_model
        self.sensors = sensor_field
        self.kinds = list(enabled_kinds)
        self.failures = list(failures or [])
        self.radio_rng = substream(seed, "radio")
        self.clock = SimClock()
        self.trace = bytearray()
        self.node_state = {n: NodeState(n) for n in network.nodes}
        self._frame_seq = {n: 0 for n in network.nodes}
        self._base_seen: set[tuple[int, SensorKind, int]] = set()
        self.samples_taken = 0

    def failed_at(self, t: float) -> set[int]:
        return {node for node, at in self.failures if at <= t}

    def _next_seq(self, node: int) -> int:
        s = self._frame_seq[node]
        self._frame_seq[node] = (s + 1) & 0xFF
        return s

    def _link_m(self, a: int, b: int) -> float:
        return self.network.nodes[a].position.distance_to(
            self.network.nodes[b].position)

    def _transmit(self, frame: Frame, dest: int, t: float):
        """One transmit attempt; every attempt lands in the trace and burns
        airtime whether or not it is delivered."""
        wire = radio.encode(frame)
        self.trace += serialize_trace_entry(int(t), wire)
        outcome = radio.transmit(self.radio_model, self._link_m(frame.src, dest),
                                 frame, self.radio_rng)
        airtime = len(wire) * 8 / self.radio_model.data_rate * 1000.0
        return outcome, t + airtime

    def _sample_node(self, node: int, t: int) -> list[Reading]:
        state = self.node_state[node]
        readings = []
        for kind in self.kinds:
            r = self.sensors.sample(node, kind, t)
            self.samples_taken += 1
            state.latest[kind] = r
            readings.append(r)
        return readings

    def interrupt_call(self, caller: int, target: int, t: float,
                       failed: set[int]) -> tuple[list[Reading] | None, float]:
        """Poll target for its data; one retry, then the round gives up on it.

        Returns (readings or None on timeout, time after the exchange).
        """
        for _ in range(POLL_ATTEMPTS):
            poll = Frame(FrameKind.POLL, caller, target, self._next_seq(caller))
            outcome, t = self._transmit(poll, target, t)
            if isinstance(outcome, Dropped) or target in failed:
                continue
            if not isinstance(outcome, Delivered):
                continue  # out of range counts as a failed attempt
            readings = self._sample_node(target, int(t))
            reply = Frame(FrameKind.DATA, target, caller,
                          self._next_seq(target),
                          radio.encode_readings(readings))
            outcome, t = self._transmit(reply, caller, t)
            if isinstance(outcome, Delivered):
                return readings, t
        return None, t

    def _forward_to_base(self, head: int, readings: list[Reading], t: float,
                         failed: set[int],
                         relay_cache: dict[int, dict[tuple, Reading]],
                         base_rx: list[Reading],
                         path: list[int] | None = None) -> tuple[float, int]:
        """Send readings hop-by-hop along the data-flow path; relay heads
        keep a copy (data redundancy). Returns (time, duplicates seen at base)."""
        dups = 0
        if path is None:
            path = self.network.flow_path(head)
        for chunk_start in range(0, len(readings), radio.READINGS_PER_FRAME):
            chunk = readings[chunk_start:chunk_start + radio.READINGS_PER_FRAME]
            cur = head
            for nxt in path:
                if nxt in failed:
                    break
                frame = Frame(FrameKind.DATA, cur, nxt, self._next_seq(cur),
                              radio.encode_readings(chunk))
                outcome, t = self._transmit(frame, nxt, t)
                if not isinstance(outcome, Delivered):
                    break
                if nxt == BASE_ID:
                    for r in chunk:
                        key = (r.node, r.kind, r.seq)
                        if key in self._base_seen:
                            dups += 1
                        else:
                            self._base_seen.add(key)
                            base_rx.append(r)
                else:
                    cache = relay_cache.setdefault(nxt, {})
                    for r in chunk:
                        cache[(r.node, r.kind, r.seq)] = r
                cur = nxt
        return t, dups

    def _head_order(self, failed: set[int]) -> list[int]:
        heads = [h for h in self.network.heads() if h not in failed]
        if self.network.spec.kind is not TopologyKind.STAR_ON_RING:
            return heads
        # ring: send in relay order ending at the attach head, so that
        # downstream relays re-send what passed through them
        attach = self.network.attach_head()
        order = []
        cur = self.network.ring_successor(attach) or attach
        while True:
            order.append(cur)
            if cur == attach:
                break
            cur = self.network.ring_successor(cur)
        return [h for h in order if h not in failed]

    def run_round(self, round_index: int, t: int) -> RoundReport:
        failed = self.failed_at(t)
        samples_before = self.samples_taken
        self._base_seen.clear()
        base_rx: list[Reading] = []
        dups = 0
        tm = float(t)
        relay_cache: dict[int, dict[tuple, Reading]] = {}

        attach = self.network.attach_head()
        for head in self._head_order(failed):
            state = self.node_state[head]
            own = self._sample_node(head, t)
            for sub in self.network.subs_of(head):
                readings, tm = self.interrupt_call(head, sub, tm, failed)
                if readings is not None:
                    state.sub_cache[sub] = readings
            received = []
            for sub in self.network.subs_of(head):
                cached = state.sub_cache.get(sub)
                if cached and cached[0].t >= t:
                    received.extend(cached)
            # relayed records picked up before this head's own send
            received.extend(relay_cache.pop(head, {}).values())
            if head == attach:
                # received traffic exits to the base directly; the attach
                # head's own data relays the full ring first
                tm, d1 = self._forward_to_base(head, received, tm, failed,
                                               relay_cache, base_rx,
                                               path=[BASE_ID])
                tm, d2 = self._forward_to_base(head, own, tm, failed,
                                               relay_cache, base_rx)
                dups += d1 + d2
            else:
                tm, d = self._forward_to_base(head, own + received, tm,
                                              failed, relay_cache, base_rx)
                dups += d

        delivered_nodes = {r.node for r in base_rx}
        missing = set(self.network.sensor_nodes()) - delivered_nodes
        return RoundReport(round_index=round_index, t=t,
                           readings_delivered=base_rx,
                           duplicates_suppressed=dups,
                           nodes_missing=missing,
                           samples_taken=self.samples_taken - samples_before)

    def poll_node(self, node: int, t: int) -> list[Reading]:
        """Operator-initiated end-to-end poll, bypassing the round cadence.

        The poll is routed base -> head -> node over the reverse data-flow
        path; raises Timeout when the node is unreachable."""
        if node not in self.network.nodes or node == BASE_ID:
            raise KeyError(f"unknown node {node}")
        failed = self.failed_at(t)
        report = failure_impact(self.network, failed)
        if node not in report.reachable:
            raise Timeout(f"node {node} unreachable")
        path = [BASE_ID] + list(reversed(self.network.flow_path(node)))[1:] + [node]
        tm = float(t)
        readings = None
        for caller, target in zip(path, path[1:]):
            if target == node:
                readings, tm = self.interrupt_call(caller, target, tm, failed)
            else:
                poll = Frame(FrameKind.POLL, caller, target,
                             self._next_seq(caller))
                _, tm = self._transmit(poll, target, tm)
        if readings is None:
            raise Timeout(f"node {node} did not answer")
        return readings

    def run(self, interval_ms: int, duration_ms: int,
            on_report=None) -> SimResult:
        reports: list[RoundReport] = []

        def make_round(idx: int, at: int):
            def fire():
                report = self.run_round(idx, at)
                reports.append(report)
                if on_report is not None:
                    on_report(report)
            return fire

        idx = 0
        at = 0
        while at < duration_ms:
            self.clock.schedule(at, make_round(idx, at))
            idx += 1
            at += interval_ms
        self.clock.run_until_empty()
        return SimResult(reports=reports, trace=bytes(self.trace))
