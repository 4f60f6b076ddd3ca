"""Command line entry point: run / analyze / plot / replay / serve."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ParseError, SemanticError, parse_scenario
from .gateway import ReadingsLog, parse_csv
from .live import ServeHarness, build_simulator
from .sensors import SensorKind
from .topology import (TopologyError, build_topology, failure_impact,
                       max_hops, validate)


class CliError(Exception):
    pass


def _load_scenario(path: str):
    try:
        return parse_scenario(Path(path).read_text())
    except OSError as e:
        raise CliError(f"cannot read scenario: {e}") from None
    except (ParseError, SemanticError, TopologyError) as e:
        raise CliError(f"{path}: {e}") from None


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"cannot create out dir: {e}") from None

    sim, network = build_simulator(scenario)
    problems = validate(network)
    if problems:
        raise CliError("invalid network: " + "; ".join(problems))

    try:
        log = ReadingsLog(out / "readings.csv", mode="sim")
    except Exception as e:
        raise CliError(f"out dir not writable: {e}") from None

    def on_report(report):
        log.ingest_report(report)
        log.flush()

    result = sim.run(scenario.interval_ms, scenario.duration_ms, on_report)
    log.close()
    (out / "trace.bin").write_bytes(result.trace)
    summary = ["round,t_ms,delivered,duplicates_suppressed,missing"]
    for r in result.reports:
        summary.append(f"{r.round_index},{r.t},{len(r.readings_delivered)},"
                       f"{r.duplicates_suppressed},"
                       f"{'|'.join(map(str, sorted(r.nodes_missing)))}")
    (out / "rounds.csv").write_text("\n".join(summary) + "\n")
    print(f"{len(result.reports)} rounds, {len(log.records)} records -> {out}")
    return 0


def cmd_analyze(args) -> int:
    scenario = _load_scenario(args.scenario)
    network = build_topology(scenario.topology)
    failed = set()
    if args.fail:
        failed = {int(n) for n in args.fail.split(",")}
    try:
        report = failure_impact(network, failed)
    except TopologyError as e:
        raise CliError(str(e)) from None
    print(f"topology: {scenario.topology.kind.value}, "
          f"{len(network.sensor_nodes())} sensor nodes")
    print(f"failed:      {sorted(failed) or '-'}")
    print(f"reachable:   {sorted(report.reachable)}")
    print(f"unreachable: {sorted(report.unreachable)}")
    if not failed:
        print(f"max hops:    {max_hops(network)}")
    return 0


def cmd_plot(args) -> int:
    try:
        records = parse_csv(Path(args.log).read_text())
    except OSError as e:
        raise CliError(f"cannot read log: {e}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def write_series(node: int, kind: SensorKind) -> Path:
        rows = [r for r in records if r.node == node and r.kind is kind]
        if not any(r.node == node for r in records):
            raise CliError(f"UnknownNode: node {node} not in log")
        if not rows:
            raise CliError(f"EmptySeries: no {kind.value} readings for node {node}")
        path = out / f"node{node}_{kind.value}.csv"
        lines = ["t_ms,value"] + [f"{r.timestamp},{r.to_csv_line().split(',')[3]}"
                                  for r in rows]
        path.write_text("\n".join(lines) + "\n")
        return path

    if args.all:
        pairs = sorted({(r.node, r.kind) for r in records},
                       key=lambda p: (p[0], p[1].value))
        for node, kind in pairs:
            write_series(node, kind)
        print(f"{len(pairs)} series -> {out}")
    else:
        if args.node is None or args.kind is None:
            raise CliError("plot needs --node and --kind (or --all)")
        path = write_series(args.node, SensorKind(args.kind))
        print(f"series -> {path}")
    return 0


def cmd_replay(args) -> int:
    try:
        trace = Path(args.trace).read_bytes()
    except OSError as e:
        raise CliError(f"cannot read trace: {e}") from None
    log = ReadingsLog(Path(args.out), mode="sim")
    count = log.ingest_trace(trace)
    log.close()
    print(f"{count} records, {log.decode_errors} decode errors -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    scenario = _load_scenario(args.scenario)
    static = Path(args.static) if args.static else None
    harness = ServeHarness(scenario, log_path=args.log,
                           tcp_port=args.port, http_port=args.http_port,
                           static_root=static, realtime=args.realtime)
    harness.start(run_simulator=not args.no_sim)
    print(f"tcp line protocol on 127.0.0.1:{harness.tcp_port}, "
          f"http on 127.0.0.1:{harness.http_port}")
    try:
        while True:
            harness.wait_sim(3600)
    except KeyboardInterrupt:
        harness.stop()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="minewatch",
        description="Mine WSN simulator, gateway, and monitoring server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario end to end")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("analyze", help="reachability and hop analysis")
    p.add_argument("--scenario", required=True)
    p.add_argument("--fail", default="", help="comma-separated node ids")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("plot", help="emit plot-ready per-series CSVs")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--node", type=int, default=None)
    p.add_argument("--kind", default=None)
    p.add_argument("--all", action="store_true")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("replay", help="replay a frame trace into a gateway log")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="start gateway + monitoring server")
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=7700)
    p.add_argument("--http-port", type=int, default=7701)
    p.add_argument("--log", default=None)
    p.add_argument("--static", default=None, help="console asset directory")
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--no-sim", action="store_true",
                   help="serve detached, without the embedded simulator")
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
