"""The bundled roundabout experiment: give way, queue, merge, clear.

Three cars on the entry leg meet a three-car platoon already rolling on
the ring. The entry cars see a virtual (projected) leader for each ring
car holding the conflict window, brake behind the yield line, and a
queue forms. Once the ring platoon clears, the queue drains through the
merge in order. The full-size twin of the scenario (scale 1 instead of
1:25) reproduces the same discrete story, which is the point: the desk
setup is a faithful miniature.
"""

import time
from pathlib import Path

import cavsim
from cavsim.analysis import by_vehicle, extract_events, moving_average, series
from cavsim.harness import Experiment
from cavsim.scenario import load_scenario

SCENARIOS = Path(cavsim.__file__).parent / "data" / "scenarios"


def run(name):
    config = load_scenario(SCENARIOS / name)
    exp = Experiment(config)
    t0 = time.monotonic()
    records = exp.run()
    print(f"{name}: {len(records)} records in "
          f"{time.monotonic() - t0:.2f}s wall")
    return config, records, exp.stop_speed


def main():
    config, records, stop_speed = run("roundabout.scn")
    merge_p = config.merge_pairs[0][2]
    entry_offset = config.paths["entry"].merge_offset
    per = by_vehicle(records)

    print("\nqueue formation on the entry leg (0.1 s filtered speed):")
    for spec in config.vehicles:
        if spec.path_id != "entry":
            continue
        recs = per[spec.vehicle_id]
        filt = moving_average(series(recs, "v"), 0.1)
        idx = next(i for i, (_, v) in enumerate(filt) if v < stop_speed)
        print(f"  vehicle {spec.vehicle_id} stops at t={recs[idx].t:.1f}s, "
              f"{recs[idx].p - entry_offset:.3f} m along the leg")

    events = extract_events(records, merge_p, stop_speed)
    print(f"\nmerge order:      {events.merged}")
    print(f"completion order: {events.completed}")

    print()
    config_f, records_f, stop_f = run("roundabout_fullscale.scn")
    events_f = extract_events(records_f, config_f.merge_pairs[0][2], stop_f)
    print(f"full-scale twin tells the same story: {events == events_f}")


if __name__ == "__main__":
    main()
