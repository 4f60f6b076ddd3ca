"""Link layer: API-style frame encoding with checksum, reading payload
serialization, and per-link delivery with range / loss / latency semantics.

Wire layout: 0x7E delimiter, u16 big-endian length, then
[kind u8, src u16, dest u16, seq u8, payload...], then a trailing checksum
byte 0xFF - (sum of everything after the length field) mod 256. The length
counts the bytes between the length field and the checksum.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from enum import IntEnum

from .sensors import Reading, SensorKind

DELIMITER = 0x7E
BROADCAST = 0xFFFF
MAX_PAYLOAD = 100
HEADER_LEN = 6  # kind + src + dest + seq

DEFAULT_DATA_RATE = 250_000  # bits/s

READING_WIRE_LEN = 11  # u16 node, u8 kind, i16 value, u16 seq, u32 t_ms
READINGS_PER_FRAME = MAX_PAYLOAD // READING_WIRE_LEN

_KIND_CODES = {k: i for i, k in enumerate(SensorKind)}
_KIND_BY_CODE = {i: k for k, i in _KIND_CODES.items()}


class RadioError(Exception):
    pass


class PayloadTooLarge(RadioError):
    pass


class BadDelimiter(RadioError):
    pass


class LengthMismatch(RadioError):
    pass


class ChecksumMismatch(RadioError):
    pass


class NotBroadcastDest(RadioError):
    pass


class FrameKind(IntEnum):
    DATA = 0x00
    POLL = 0x01
    ACK = 0x02


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    src: int
    dest: int
    seq: int  # u8
    payload: bytes = b""


@dataclass(frozen=True)
class RadioModel:
    data_rate: int = DEFAULT_DATA_RATE
    range_m: float = 30.0
    loss_prob: float = 0.0


@dataclass(frozen=True)
class Delivered:
    latency_ms: float


class Dropped:
    def __eq__(self, other):
        return isinstance(other, Dropped)

    def __hash__(self):
        return hash(Dropped)

    def __repr__(self):
        return "Dropped()"


class OutOfRange:
    def __eq__(self, other):
        return isinstance(other, OutOfRange)

    def __hash__(self):
        return hash(OutOfRange)

    def __repr__(self):
        return "OutOfRange()"


def checksum(body: bytes) -> int:
    return (0xFF - sum(body)) & 0xFF


def encode(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload {len(frame.payload)} > {MAX_PAYLOAD} bytes")
    body = struct.pack(">BHHB", frame.kind, frame.src, frame.dest,
                       frame.seq & 0xFF) + frame.payload
    return bytes([DELIMITER]) + struct.pack(">H", len(body)) + body + bytes([checksum(body)])


def decode(data: bytes) -> Frame:
    if len(data) < 1 or data[0] != DELIMITER:
        raise BadDelimiter(f"expected 0x7E, got {data[:1].hex() or 'empty'}")
    if len(data) < 3:
        raise LengthMismatch("truncated before length field")
    (length,) = struct.unpack(">H", data[1:3])
    if len(data) != 3 + length + 1:
        raise LengthMismatch(f"length field {length} vs {len(data) - 4} body bytes")
    if length < HEADER_LEN:
        raise LengthMismatch(f"length {length} shorter than header")
    body = data[3:3 + length]
    if checksum(body) != data[-1]:
        raise ChecksumMismatch(
            f"expected 0x{checksum(body):02x}, got 0x{data[-1]:02x}")
    kind, src, dest, seq = struct.unpack(">BHHB", body[:HEADER_LEN])
    return Frame(FrameKind(kind), src, dest, seq, bytes(body[HEADER_LEN:]))


def encode_readings(readings: list[Reading]) -> bytes:
    """Pack readings into a Data-frame payload (big-endian fixed point)."""
    out = bytearray()
    for r in readings:
        if r.kind is SensorKind.TEMPERATURE:
            value = int(round(r.value * 2))  # half-degree steps
        else:
            value = int(r.value)
        out += struct.pack(">HBhHI", r.node, _KIND_CODES[r.kind],
                           _to_i16(value), r.seq, r.t)
    return bytes(out)


def decode_readings(payload: bytes) -> list[Reading]:
    if len(payload) % READING_WIRE_LEN != 0:
        raise LengthMismatch(f"payload {len(payload)} not a multiple of "
                             f"{READING_WIRE_LEN}")
    readings = []
    for off in range(0, len(payload), READING_WIRE_LEN):
        node, code, value, seq, t = struct.unpack(
            ">HBhHI", payload[off:off + READING_WIRE_LEN])
        kind = _KIND_BY_CODE[code]
        if kind is SensorKind.TEMPERATURE:
            readings.append(Reading(node, kind, value / 2.0, t, seq))
        elif kind is SensorKind.LIGHT:
            # light is unsigned 16-bit; reinterpret the raw bits
            readings.append(Reading(node, kind, value & 0xFFFF, t, seq))
        else:
            readings.append(Reading(node, kind, value, t, seq))
    return readings


def _to_i16(value: int) -> int:
    value &= 0xFFFF
    return value - 0x10000 if value >= 0x8000 else value


def transmit(model: RadioModel, link_length_m: float, frame: Frame,
             rng: random.Random) -> Delivered | Dropped | OutOfRange:
    """One attempt over one physical link."""
    if link_length_m > model.range_m:
        return OutOfRange()
    if model.loss_prob > 0 and rng.random() < model.loss_prob:
        return Dropped()
    bits = len(encode(frame)) * 8
    return Delivered(latency_ms=bits / model.data_rate * 1000.0)


def broadcast(model: RadioModel, network, src: int, frame: Frame,
              rng: random.Random) -> dict[int, Delivered | Dropped]:
    """Attempt delivery to every node geometrically in range of src,
    regardless of topology links."""
    if frame.dest != BROADCAST:
        raise NotBroadcastDest(f"broadcast frame dest must be 0xFFFF, "
                               f"got 0x{frame.dest:04x}")
    src_pos = network.nodes[src].position
    results = {}
    for node in sorted(network.nodes):
        if node == src:
            continue
        d = src_pos.distance_to(network.nodes[node].position)
        if d <= model.range_m:
            results[node] = transmit(model, d, frame, rng)
    return results
