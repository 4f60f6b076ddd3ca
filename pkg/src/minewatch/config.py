"""Scenario files: INI-style sections [topology], [radio], [sensors],
[events], [alarms], [run]. Parse errors carry the offending line number and
field; semantic errors (unknown node, event past duration) are separate.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .radio import RadioModel, DEFAULT_DATA_RATE
from .sensors import ChannelModel, HazardEvent, SensorKind, SensorModel
from .server import AlarmDirection, AlarmRule
from .topology import (Position, RangeProfile, TopologyKind, TopologySpec,
                       build_topology)


class ParseError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SemanticError(Exception):
    pass


@dataclass(frozen=True)
class Scenario:
    topology: TopologySpec
    radio: RadioModel
    sensors: SensorModel
    kinds: tuple[SensorKind, ...]
    hazards: tuple[HazardEvent, ...] = ()
    failures: tuple[tuple[int, int], ...] = ()  # (node, at_ms)
    alarm_rules: tuple[AlarmRule, ...] = ()
    interval_ms: int = 10_000
    duration_ms: int = 600_000
    seed: int = 0


_KIND_BY_NAME = {k.value: k for k in SensorKind}
_KIND_BY_NAME["carbon_monoxide"] = SensorKind.CARBON_MONOXIDE


def _line_of(text: str, section: str, key: str | None = None) -> int:
    """Best-effort line number of a key (or section header) in the source."""
    in_section = False
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
            if in_section and key is None:
                return i
        elif in_section and key is not None:
            name = stripped.split("=", 1)[0].strip()
            if name == key:
                return i
    return 0


def _kv_pairs(value: str) -> dict[str, str]:
    out = {}
    for part in value.split():
        k, _, v = part.partition("=")
        if not v:
            raise ValueError(f"expected key=value, got {part!r}")
        out[k] = v
    return out


class _Section:
    def __init__(self, text: str, name: str, cp: configparser.ConfigParser):
        self.text = text
        self.name = name
        self.raw = cp[name] if cp.has_section(name) else {}

    def get(self, key: str, default=None, convert=str):
        if key not in self.raw:
            return default
        try:
            return convert(self.raw[key])
        except (ValueError, KeyError) as e:
            raise ParseError(_line_of(self.text, self.name, key),
                             f"bad value for {self.name}.{key}: {e}") from None

    def require(self, key: str, convert=str):
        if key not in self.raw:
            raise ParseError(_line_of(self.text, self.name) or 1,
                             f"missing required field {self.name}.{key}")
        return self.get(key, convert=convert)


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ParseError(e.lineno, "content before any section header") from None
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else 0
        raise ParseError(line, str(e.message).splitlines()[0]) from None
    except (configparser.DuplicateSectionError,
            configparser.DuplicateOptionError) as e:
        raise ParseError(e.lineno or 0, e.message.splitlines()[0]) from None

    if not cp.has_section("topology"):
        raise ParseError(1, "missing required [topology] section")

    topo_sec = _Section(text, "topology", cp)
    kind = topo_sec.require("kind", lambda v: TopologyKind(v))
    clusters = topo_sec.require("clusters", int)
    subs_raw = topo_sec.get("subs_per_cluster", "0")
    subs = tuple(int(s) for s in str(subs_raw).split(","))
    if len(subs) == 1:
        subs = subs * clusters
    profile = topo_sec.get("range_profile", RangeProfile.INDOOR,
                           lambda v: RangeProfile(v))
    base_attach = topo_sec.get("base_attach", 0, int)
    geometry = topo_sec.get("positions", None, _parse_positions)
    topo = TopologySpec(kind, clusters, subs, profile, base_attach, geometry)

    radio_sec = _Section(text, "radio", cp)
    radio = RadioModel(
        data_rate=radio_sec.get("data_rate", DEFAULT_DATA_RATE, int),
        range_m=profile.range_m,
        loss_prob=radio_sec.get("loss_prob", 0.0, float))

    sens_sec = _Section(text, "sensors", cp)
    kinds = sens_sec.get("kinds", (SensorKind.TEMPERATURE, SensorKind.LIGHT),
                         _parse_kinds)
    kappa = sens_sec.get("kappa", 0.1, float)
    channels = dict(SensorModel.default().channels)
    for label, k in _KIND_BY_NAME.items():
        if label in sens_sec.raw:
            kv = sens_sec.get(label, convert=_kv_pairs)
            base = channels[k]
            channels[k] = ChannelModel(
                baseline=float(kv.get("baseline", base.baseline)),
                walk_sigma=float(kv.get("sigma", base.walk_sigma)),
                min_value=float(kv.get("min", base.min_value)),
                max_value=float(kv.get("max", base.max_value)))
    sensors = SensorModel(channels=channels, kappa=kappa)

    ev_sec = _Section(text, "events", cp)
    failures = ev_sec.get("failures", (), _parse_failures)
    hazards = ev_sec.get("hazards", (), _parse_hazards)

    alarm_rules = []
    if cp.has_section("alarms"):
        al_sec = _Section(text, "alarms", cp)
        for name in cp["alarms"]:
            kv = al_sec.get(name, convert=_kv_pairs)
            try:
                alarm_rules.append(AlarmRule(
                    name=name,
                    kind=_KIND_BY_NAME[kv["kind"]],
                    direction=AlarmDirection(kv["dir"]),
                    trip=float(kv["trip"]),
                    clear=float(kv["clear"]),
                    consecutive=int(kv.get("consecutive", 2))))
            except (KeyError, ValueError) as e:
                raise ParseError(_line_of(text, "alarms", name),
                                 f"bad alarm rule {name}: {e}") from None

    run_sec = _Section(text, "run", cp)
    scenario = Scenario(
        topology=topo, radio=radio, sensors=sensors, kinds=kinds,
        hazards=hazards, failures=failures, alarm_rules=tuple(alarm_rules),
        interval_ms=run_sec.get("interval_ms", 10_000, int),
        duration_ms=run_sec.get("duration_ms", 600_000, int),
        seed=run_sec.get("seed", 0, int))
    _check_semantics(scenario)
    return scenario


def _check_semantics(s: Scenario) -> None:
    net = build_topology(s.topology)
    nodes = set(net.nodes)
    for node, at in s.failures:
        if node not in nodes:
            raise SemanticError(f"failure references unknown node {node}")
        if at > s.duration_ms:
            raise SemanticError(f"failure at {at} ms is past duration "
                                f"{s.duration_ms} ms")
    for h in s.hazards:
        if h.node not in nodes:
            raise SemanticError(f"hazard references unknown node {h.node}")
        if h.start_ms > s.duration_ms:
            raise SemanticError(f"hazard at {h.start_ms} ms is past duration "
                                f"{s.duration_ms} ms")
        if h.kind not in s.kinds:
            raise SemanticError(f"hazard on disabled channel {h.kind.value}")


def _parse_kinds(value: str) -> tuple[SensorKind, ...]:
    return tuple(_KIND_BY_NAME[v.strip()] for v in value.split(","))


def _parse_failures(value: str) -> tuple[tuple[int, int], ...]:
    out = []
    for part in value.split(","):
        node, _, at = part.strip().partition("@")
        out.append((int(node), int(at)))
    return tuple(out)


def _parse_hazards(value: str) -> tuple[HazardEvent, ...]:
    # kind@node:start-end:rate, comma separated
    out = []
    for part in value.split(","):
        kind_s, _, rest = part.strip().partition("@")
        node_s, _, rest = rest.partition(":")
        window, _, rate_s = rest.partition(":")
        start_s, _, end_s = window.partition("-")
        out.append(HazardEvent(kind=_KIND_BY_NAME[kind_s], node=int(node_s),
                               start_ms=int(start_s), end_ms=int(end_s),
                               ramp_rate=float(rate_s)))
    return tuple(out)


def _parse_positions(value: str) -> dict[int, Position]:
    # node:x,y pairs separated by semicolons
    out = {}
    for part in value.split(";"):
        node_s, _, xy = part.strip().partition(":")
        x_s, _, y_s = xy.partition(",")
        out[int(node_s)] = Position(float(x_s), float(y_s))
    return out


def render_scenario(s: Scenario) -> str:
    """Inverse of parse_scenario (parse(render(s)) == s)."""
    lines = ["[topology]",
             f"kind = {s.topology.kind.value}",
             f"clusters = {s.topology.cluster_count}",
             "subs_per_cluster = " + ",".join(map(str, s.topology.subs_per_cluster)),
             f"range_profile = {s.topology.range_profile.value}",
             f"base_attach = {s.topology.base_attach}"]
    if s.topology.geometry:
        pos = ";".join(f"{n}:{p.x},{p.y}"
                       for n, p in sorted(s.topology.geometry.items()))
        lines.append(f"positions = {pos}")
    lines += ["", "[radio]",
              f"data_rate = {s.radio.data_rate}",
              f"loss_prob = {s.radio.loss_prob}"]
    lines += ["", "[sensors]",
              "kinds = " + ",".join(k.value for k in s.kinds),
              f"kappa = {s.sensors.kappa}"]
    for k, ch in s.sensors.channels.items():
        lines.append(f"{k.value} = baseline={ch.baseline} sigma={ch.walk_sigma} "
                     f"min={ch.min_value} max={ch.max_value}")
    lines += ["", "[events]"]
    if s.failures:
        lines.append("failures = " + ",".join(f"{n}@{t}" for n, t in s.failures))
    if s.hazards:
        lines.append("hazards = " + ",".join(
            f"{h.kind.value}@{h.node}:{h.start_ms}-{h.end_ms}:{h.ramp_rate}"
            for h in s.hazards))
    lines += ["", "[alarms]"]
    for r in s.alarm_rules:
        lines.append(f"{r.name} = kind={r.kind.value} dir={r.direction.value} "
                     f"trip={r.trip} clear={r.clear} consecutive={r.consecutive}")
    lines += ["", "[run]",
              f"interval_ms = {s.interval_ms}",
              f"duration_ms = {s.duration_ms}",
              f"seed = {s.seed}", ""]
    return "\n".join(lines)
