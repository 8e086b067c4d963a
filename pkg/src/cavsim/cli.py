"""Command line front end.

Four subcommands:

  cavsim run scenario.scn       execute an experiment (logs to --log-dir)
  cavsim replay run-001.csv     serve a recorded log to consoles
  cavsim validate scenario.scn  parse and resolve a scenario, report it
  cavsim simulator              stand-alone vehicle simulator process

Exit codes: 0 on success, 2 when a run ends in a collision, 1 for
configuration or input errors.
"""

from __future__ import annotations

import argparse
import sys
import time

from .analysis import read_log
from .errors import CavsimError, CollisionDetected
from .gateway import OperatorGateway
from .harness import Experiment, LogReplayer
from .scenario import load_scenario, spawn_vehicles
from .simulator import SimulatorServer


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavsim",
        description="deterministic co-simulation for scaled automated vehicles")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario")
    run.add_argument("scenario", help="scenario file (.scn)")
    run.add_argument("--mode", choices=("in_process", "networked"),
                     default="in_process")
    run.add_argument("--sim-host", default="127.0.0.1",
                     help="simulator address for networked mode")
    run.add_argument("--cmd-port", type=int, default=9870)
    run.add_argument("--stream-port", type=int, default=9871)
    run.add_argument("--gateway-port", type=int, default=9880)
    run.add_argument("--log-dir", default="runs",
                     help="directory for run-NNN.csv logs")
    run.add_argument("--duration", type=float, default=None,
                     help="override scenario duration, seconds")
    run.add_argument("--headless", action="store_true",
                     help="no gateway, no realtime pacing; run flat out")

    replay = sub.add_parser("replay", help="replay a recorded log")
    replay.add_argument("log", help="log file (run-NNN.csv)")
    replay.add_argument("--speed", type=float, default=1.0,
                        help="playback rate multiplier")
    replay.add_argument("--gateway-port", type=int, default=9880)
    replay.add_argument("--stream-port", type=int, default=9871,
                        help="transform rebroadcast channel")

    validate = sub.add_parser("validate", help="check a scenario file")
    validate.add_argument("scenario", help="scenario file (.scn)")

    sim = sub.add_parser("simulator", help="run the vehicle simulator")
    sim.add_argument("--host", default="127.0.0.1")
    sim.add_argument("--cmd-port", type=int, default=9870)
    sim.add_argument("--stream-port", type=int, default=9871)

    return parser


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.scenario)
    except (CavsimError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.duration is not None:
        import dataclasses
        config = dataclasses.replace(config, duration=args.duration)

    try:
        experiment = Experiment(
            config, mode=args.mode, log_dir=args.log_dir,
            sim_host=args.sim_host, cmd_port=args.cmd_port,
            stream_port=args.stream_port, realtime=not args.headless)
    except CavsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if args.headless:
        try:
            experiment.run()
        except CollisionDetected as e:
            print(f"collision: {e}", file=sys.stderr)
            return 2
        except CavsimError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        print(f"complete at t={experiment.clock:g}s")
        return 0

    try:
        gateway = OperatorGateway(experiment, port=args.gateway_port)
    except CavsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    gateway.start()
    print(f"operator gateway on ws://127.0.0.1:{gateway.port}",
          flush=True)  # consoles attach while this process is still running
    experiment.start_background()
    try:
        while experiment.state != "complete" and experiment.error is None:
            time.sleep(0.25)
    except KeyboardInterrupt:
        experiment.stop()
        experiment.join(timeout=5.0)
    finally:
        gateway.stop()
    if isinstance(experiment.error, CollisionDetected):
        print(f"collision: {experiment.error}", file=sys.stderr)
        return 2
    if experiment.error is not None:
        print(f"error: {experiment.error}", file=sys.stderr)
        return 1
    print(f"complete at t={experiment.clock:g}s")
    return 0


def _cmd_replay(args) -> int:
    try:
        records = read_log(args.log)
    except (CavsimError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.speed <= 0:
        print("error: --speed must be positive", file=sys.stderr)
        return 1
    try:
        replayer = LogReplayer(records, speed=args.speed,
                               stream_port=args.stream_port)
        gateway = OperatorGateway(replayer, port=args.gateway_port)
    except CavsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    gateway.start()
    print(f"operator gateway on ws://127.0.0.1:{gateway.port}",
          flush=True)  # consoles attach while this process is still running
    replayer.start_background()
    try:
        while replayer.state != "complete":
            time.sleep(0.25)
    except KeyboardInterrupt:
        pass
    finally:
        replayer.stop()
        gateway.stop()
    print(f"replayed {replayer.tick_groups} tick groups")
    return 0


def _cmd_validate(args) -> int:
    try:
        config = load_scenario(args.scenario)
        spawned = spawn_vehicles(config)
    except (CavsimError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"{config.name}: scale 1/{config.scale:g}, "
          f"{config.duration:g}s at planner_dt={config.planner_dt:g}s "
          f"({config.substeps} physics substeps)")
    for path in config.paths.values():
        tag = (f" (merge frame offset {path.merge_offset:+g})"
               if path.merge_offset else "")
        print(f"  path {path.path_id}: length {path.length:.4f}{tag}")
    for a, b, p in config.merge_pairs:
        print(f"  merge: {a} joins {b} at p={p:g}")
    for rule in config.yield_rules:
        print(f"  yield: {rule.yield_path} gives way to {rule.priority_path} "
              f"at p={rule.yield_position:g}, "
              f"window [{rule.window_lo:g}, {rule.window_hi:g}]")
    for state in spawned:
        print(f"  vehicle {state.vehicle_id} on {state.path_id}: "
              f"p={state.p:.4f} v={state.v:g}")
    print(f"ok: {len(spawned)} vehicles")
    return 0


def _cmd_simulator(args) -> int:
    try:
        server = SimulatorServer(cmd_port=args.cmd_port,
                                 stream_port=args.stream_port, host=args.host)
    except CavsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    server.start()
    # report the bound ports, which differ from the arguments for port 0
    print(f"simulator listening: udp {args.host}:{server.cmd_port}, "
          f"tcp {args.host}:{server.stream_port}", flush=True)
    try:
        server.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "replay": _cmd_replay,
        "validate": _cmd_validate,
        "simulator": _cmd_simulator,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
