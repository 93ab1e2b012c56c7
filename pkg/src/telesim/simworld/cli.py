"""`sim` command-line entry point.

    sim run --scenario bar --seed 3 --duration 45
    sim run --scenario flat --realtime --serve 8730

Without --serve the run is headless and prints one JSON metrics record per
simulated second; with --serve the operator station is exposed on
http://localhost:<port> (GET /status, WebSocket /ws) while the simulation
advances in a background thread.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time

from telesim.mapping import save_heightmap, save_xyz

from .scenario import (
    ScenarioRunner,
    default_config,
    load_scenario,
)
from .terrain import SCENARIOS, ScenarioError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim", description="teleoperation simulation scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a closed-loop scenario")
    run.add_argument("--scenario", default="flat",
                     help=f"one of {', '.join(SCENARIOS)}, or a config file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--duration", type=float, default=None,
                     help="simulated seconds (default: scenario-specific)")
    run.add_argument("--realtime", action="store_true",
                     help="pace the loop to wall-clock time")
    run.add_argument("--serve", type=int, metavar="PORT", default=None,
                     help="serve the operator station on this port")
    run.add_argument("--metrics", metavar="PATH", default=None,
                     help="write JSON-lines metrics here instead of stdout")
    run.add_argument("--export-heightmap", metavar="PATH", default=None,
                     help="write the final fused heightmap (binary .thm)")
    run.add_argument("--export-xyz", metavar="PATH", default=None,
                     help="write the final map points as ASCII x y z")
    return parser


def _make_runner(args, sink) -> ScenarioRunner:
    if args.scenario in SCENARIOS:
        cfg = default_config(args.scenario, args.seed, args.duration)
    else:
        cfg = load_scenario(args.scenario)
        cfg.seed = args.seed
        if args.duration is not None:
            cfg.duration = args.duration
    return ScenarioRunner(cfg, metrics_sink=sink)


def _run_loop(runner: ScenarioRunner, realtime: bool, stop: threading.Event):
    n = int(round(runner.config.duration / runner.config.dt))
    start = time.monotonic()
    for _ in range(n):
        if stop.is_set():
            break
        runner.tick_once()
        if realtime:
            lag = runner.state.time - (time.monotonic() - start)
            if lag > 0:
                time.sleep(lag)


def _serve(runner: ScenarioRunner, port: int, realtime: bool):
    import uvicorn

    from telesim.station import create_app

    # console commands land on the sim's uplink path
    runner.station.uplink = runner.uplink
    runner.station.send = lambda seq, cmd, data, t: runner.apply_console(
        cmd, t)
    start = time.monotonic()
    app = create_app(runner.station, clock=lambda: time.monotonic() - start)
    stop = threading.Event()
    worker = threading.Thread(
        target=_run_loop, args=(runner, realtime, stop), daemon=True)
    worker.start()
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    finally:
        stop.set()
        worker.join(timeout=2.0)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = open(args.metrics, "w") if args.metrics else sys.stdout

    def sink(rec):
        print(json.dumps(rec), file=out, flush=True)

    try:
        runner = _make_runner(args, sink)
    except (ScenarioError, OSError) as e:
        print(f"sim: {e}", file=sys.stderr)
        return 2
    try:
        if args.serve is not None:
            _serve(runner, args.serve, args.realtime)
        else:
            stop = threading.Event()
            _run_loop(runner, args.realtime, stop)
    finally:
        if args.export_heightmap and runner.controller.hm is not None:
            save_heightmap(runner.controller.hm, args.export_heightmap)
        if args.export_xyz:
            save_xyz(runner.grid.all_points(), args.export_xyz)
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
