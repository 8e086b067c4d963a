"""Two-process execution: the planner drives a simulator over sockets.

The same experiment can run in process (planner, controllers, physics
in one loop) or networked, where controllers and physics live behind a
UDP command channel and a TCP stream channel. The tick protocol is
lockstep, so a loss-free networked run writes a log byte-identical to
the in-process one. With half the command datagrams dropped the run
still completes: waypoints are absolute, so a stale one parks the
vehicle instead of corrupting it, and the simulator waits only a short
grace period for declared-but-missing waypoints.
"""

import tempfile
import time
from pathlib import Path

from cavsim.harness import Experiment
from cavsim.scenario import parse_scenario
from cavsim.simulator import SimulatorServer

DESK = "{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}"

SCENARIO = f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 30
paths:
  track: track.path
idm:
  desk: {DESK}
vehicles:
  - {{id: 1, path: track, p: 2.0, v: 0.3, idm: desk}}
  - {{id: 2, path: track, p: 1.2, v: 0.3, idm: desk}}
"""


def main():
    with tempfile.TemporaryDirectory() as tmp:
        (Path(tmp) / "track.path").write_text("LINE 0.0 0.0 4.5 0.0\n")
        config = parse_scenario(SCENARIO, base_dir=tmp, default_name="pair")
        logs = Path(tmp) / "logs"

        Experiment(config, log_dir=str(logs / "local")).run()
        local = (logs / "local" / "run-001.csv").read_bytes()
        print(f"in-process log: {len(local)} bytes")

        sim = SimulatorServer(cmd_port=0, stream_port=0)
        sim.start()
        try:
            Experiment(config, mode="networked", cmd_port=sim.cmd_port,
                       stream_port=sim.stream_port,
                       log_dir=str(logs / "net")).run()
            net = (logs / "net" / "run-001.csv").read_bytes()
            print(f"networked log:  {len(net)} bytes, "
                  f"identical: {net == local}")

            t0 = time.monotonic()
            exp = Experiment(config, mode="networked", cmd_port=sim.cmd_port,
                             stream_port=sim.stream_port, command_loss=0.5,
                             loss_seed=7)
            exp.run()
            print(f"with 50% command loss: completed in "
                  f"{time.monotonic() - t0:.1f}s wall, statuses "
                  f"{exp.status().vehicles}")
        finally:
            sim.stop()


if __name__ == "__main__":
    main()
