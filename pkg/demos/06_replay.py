"""Replaying a recorded run over the stream channel.

Every run writes a CSV log precise enough to reconstruct the whole
experiment. The replayer groups records by tick and plays them back at
a wall-clock pace scaled by the speed factor, re-emitting the recorded
poses as transform reports for any stream subscriber. A console (or
this script's bare TCP client) cannot tell a replay from a live
simulator, except that the channel refuses control messages.
"""

import tempfile
import threading
import time
from pathlib import Path

from cavsim.bridge import StreamClient
from cavsim.harness import Experiment, LogReplayer
from cavsim.protocol import TransformReport
from cavsim.scenario import parse_scenario

DESK = "{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}"

SCENARIO = f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 3
paths:
  track: track.path
idm:
  desk: {DESK}
vehicles:
  - {{id: 1, path: track, p: 1.0, v: 0.3, idm: desk}}
"""


def main():
    with tempfile.TemporaryDirectory() as tmp:
        (Path(tmp) / "track.path").write_text("LINE 0.0 0.0 5.0 0.0\n")
        config = parse_scenario(SCENARIO, base_dir=tmp, default_name="clip")
        records = Experiment(config).run()
    print(f"recorded {len(records)} records")

    for speed in (4.0, 16.0):
        replayer = LogReplayer(records, speed=speed, stream_port=0)
        client = StreamClient("127.0.0.1", replayer.stream_port, timeout=2.0)
        seen = []
        done = threading.Event()

        def pump():
            while True:
                msg = client.recv()
                if msg is None:
                    break
                if isinstance(msg, TransformReport):
                    seen.append(msg)
                    if len(seen) == len(records):
                        done.set()

        reader = threading.Thread(target=pump, daemon=True)
        reader.start()
        t0 = time.monotonic()
        replayer.start_background()
        done.wait(timeout=30.0)
        wall = time.monotonic() - t0
        replayer.stop()
        client.close()
        print(f"speed {speed:4.0f}x: {replayer.tick_groups} tick groups, "
              f"{len(seen)} transforms in {wall:.2f}s wall "
              f"(recorded span 3.0s)")


if __name__ == "__main__":
    main()
