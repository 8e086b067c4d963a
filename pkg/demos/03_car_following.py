"""Car following: a platoon compressing behind a slow leader.

The planner moves every vehicle with the intelligent driver model, so
spacing is an emergent quantity, not a setpoint. Four cars spawn with
generous gaps behind a leader capped at 0.12 m/s; the followers close
in and the whole platoon settles at the model's equilibrium gap for
that speed, which this script also computes in closed form.
"""

import math
import tempfile
from pathlib import Path

from cavsim.analysis import by_vehicle
from cavsim.harness import Experiment
from cavsim.scenario import parse_scenario

SLOW = "{u_max: 0.06, u_min: -0.12, v_max: 0.12, s_0: 0.09, T: 1.0}"
DESK = "{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}"

SCENARIO = f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 25
paths:
  track: track.path
idm:
  slow: {SLOW}
  desk: {DESK}
vehicles:
  - {{id: 1, path: track, p: 4.0, v: 0.12, idm: slow}}
  - {{id: 2, path: track, p: 3.3, v: 0.2, idm: desk}}
  - {{id: 3, path: track, p: 2.6, v: 0.2, idm: desk}}
  - {{id: 4, path: track, p: 1.9, v: 0.2, idm: desk}}
"""


def equilibrium_gap(v, v_max, s_0, T):
    # u = 0 at gap g: g = (s_0 + v T) / sqrt(1 - (v / v_max)^4)
    return (s_0 + v * T) / math.sqrt(1.0 - (v / v_max) ** 4)


def main():
    with tempfile.TemporaryDirectory() as tmp:
        (Path(tmp) / "track.path").write_text("LINE 0.0 0.0 20.0 0.0\n")
        config = parse_scenario(SCENARIO, base_dir=tmp, default_name="platoon")
        records = Experiment(config).run()

    length = config.vehicles[0].params.length
    per = by_vehicle(records)
    print(f"{'t':>5} " + " ".join(f"{'gap ' + str(v) + '->' + str(v - 1):>10}"
                                  for v in (2, 3, 4)))
    for t in (1.0, 5.0, 10.0, 15.0, 20.0, 25.0):
        idx = int(round(t / 0.1)) - 1
        gaps = []
        for follower in (2, 3, 4):
            gap = per[follower - 1][idx].p - length - per[follower][idx].p
            gaps.append(f"{gap:10.4f}")
        print(f"{t:5.1f} " + " ".join(gaps))

    g = equilibrium_gap(0.12, 0.3, 0.09, 1.0)
    print(f"\nclosed-form equilibrium gap at the leader's 0.12 m/s: {g:.4f} m")
    print("followers approach it from above; the tail car is still closing")


if __name__ == "__main__":
    main()
