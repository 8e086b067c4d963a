"""Scenario loading: reference resolution, validation errors with file
context, merge-frame alignment, and spawn overlap pushback."""

import math

import pytest

from cavsim.errors import (InvariantViolation, ParseError, PathTooShort,
                           UnknownReference)
from cavsim.scenario import load_scenario, parse_scenario, spawn_vehicles

STRAIGHT = "LINE 0.0 0.0 10.0 0.0\n"

BUNDLED = "src/cavsim/data/scenarios/roundabout.scn"


def write_path(tmp_path, name="track.path", body=STRAIGHT):
    f = tmp_path / name
    f.write_text(body)
    return f


def minimal(tmp_path, vehicles, extra=""):
    write_path(tmp_path)
    return f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 10
paths:
  track: track.path
idm:
  desk: {{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}}
{extra}
vehicles:
{vehicles}
"""


class TestParse:
    def test_minimal_roundtrip(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: 0.2, idm: desk}")
        config = parse_scenario(text, base_dir=str(tmp_path), default_name="mini")
        assert config.name == "mini"
        assert config.scale == 25
        assert config.substeps == 10
        assert config.path_order() == ["track"]
        assert len(config.vehicles) == 1
        spec = config.vehicles[0]
        assert spec.vehicle_id == 1
        assert spec.p == 1.0
        assert spec.idm.s_0 == 0.09
        # params default to the scale-derived block
        assert spec.params.scale == 25.0

    def test_bundled_roundabout(self):
        config = load_scenario(BUNDLED)
        assert len(config.vehicles) == 6
        assert len(config.paths) == 2
        assert len(config.yield_rules) == 1
        # three per path, ids unique
        per_path = {}
        for spec in config.vehicles:
            per_path.setdefault(spec.path_id, []).append(spec.vehicle_id)
        assert sorted(len(v) for v in per_path.values()) == [3, 3]

    def test_duplicate_vehicle_id(self, tmp_path):
        text = minimal(tmp_path, (
            "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: desk}\n"
            "  - {id: 1, path: track, p: 3.0, v: 0.0, idm: desk}"))
        with pytest.raises(InvariantViolation, match="vehicle id 1"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_planner_dt_not_a_multiple(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: desk}")
        text = text.replace("planner_dt: 0.1", "planner_dt: 0.015")
        with pytest.raises(InvariantViolation, match="multiple"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_unknown_path_reference(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: nowhere, p: 1.0, v: 0.0, idm: desk}")
        with pytest.raises(UnknownReference, match="nowhere"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_unknown_idm_reference(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: ghost}")
        with pytest.raises(UnknownReference, match="ghost"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_missing_path_file(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: desk}")
        text = text.replace("track.path", "gone.path")
        with pytest.raises(UnknownReference, match="gone.path"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_yaml_syntax_error_carries_line(self, tmp_path):
        with pytest.raises(ParseError, match="line"):
            parse_scenario("scale: [unclosed", base_dir=str(tmp_path))

    def test_unknown_top_level_key(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: desk}")
        text += "\nbogus_key: 1\n"
        with pytest.raises(ParseError, match="bogus_key"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_negative_speed_rejected(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: 1.0, v: -0.1, idm: desk}")
        with pytest.raises(InvariantViolation):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_field_errors_name_their_location(self, tmp_path):
        text = minimal(tmp_path, "  - {id: 1, path: track, p: oops, v: 0.0, idm: desk}")
        with pytest.raises(ParseError, match=r"vehicles\[0\]"):
            parse_scenario(text, base_dir=str(tmp_path))


def two_path_scenario(tmp_path, yield_at=3.38, window="[1.2, 2.46]"):
    """Two merging paths shaped like the bundled roundabout fixture."""
    write_path(tmp_path, "entry.path",
               "LINE -0.6 3.56 -0.6 0.0\n"
               "ARC 0.0 0.0 0.6 3.141592653589793 3.141592653589793\n")
    write_path(tmp_path, "ring.path",
               "LINE 1.3375222039230619 0.6 0.0 0.6\n"
               "ARC 0.0 0.0 0.6 1.5707963267948966 4.71238898038469\n")
    return f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 10
paths:
  entry: entry.path
  ring: ring.path
merge: {{anchor: ring, other: entry, at: [-0.6, 0.0]}}
idm:
  desk: {{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.08, T: 1.0}}
yield_rules:
  - {{yield_path: entry, priority: ring, at: {yield_at}, window: {window}}}
vehicles:
  - {{id: 1, path: entry, p: 1.9, v: 0.2, idm: desk}}
  - {{id: 2, path: ring, p: 1.3, v: 0.2, idm: desk}}
"""


class TestMergeAlignment:
    def test_equal_distance_to_merge_point(self, tmp_path):
        config = parse_scenario(two_path_scenario(tmp_path), base_dir=str(tmp_path))
        entry, ring = config.paths["entry"], config.paths["ring"]
        assert ring.merge_offset == 0.0  # anchor keeps its frame
        assert entry.merge_offset == pytest.approx(-1.28)
        ((a, b, merge_p),) = config.merge_pairs
        assert {a, b} == {"entry", "ring"}
        # merge point sits at the same aligned coordinate on both paths
        assert merge_p == pytest.approx(2.28)

    def test_yield_rule_converted_to_aligned_frame(self, tmp_path):
        config = parse_scenario(two_path_scenario(tmp_path), base_dir=str(tmp_path))
        (rule,) = config.yield_rules
        assert rule.yield_position == pytest.approx(2.10)  # raw 3.38 - 1.28
        assert rule.window_lo == pytest.approx(1.2)
        assert rule.window_hi == pytest.approx(2.46)

    def test_yield_beyond_merge_rejected(self, tmp_path):
        text = two_path_scenario(tmp_path, yield_at=4.9)  # aligned 3.62 > 2.28
        with pytest.raises(InvariantViolation, match="merge"):
            parse_scenario(text, base_dir=str(tmp_path))

    def test_yield_between_unrelated_paths_rejected(self, tmp_path):
        text = two_path_scenario(tmp_path).replace(
            "merge: {anchor: ring, other: entry, at: [-0.6, 0.0]}\n", "")
        with pytest.raises(InvariantViolation, match="merge"):
            parse_scenario(text, base_dir=str(tmp_path))


class TestSpawn:
    def config(self, tmp_path, vehicles):
        return parse_scenario(minimal(tmp_path, vehicles), base_dir=str(tmp_path))

    def test_non_overlapping_unchanged(self, tmp_path):
        config = self.config(tmp_path, (
            "  - {id: 1, path: track, p: 1.0, v: 0.0, idm: desk}\n"
            "  - {id: 2, path: track, p: 3.0, v: 0.0, idm: desk}"))
        states = spawn_vehicles(config)
        assert [s.p for s in states] == [1.0, 3.0]

    def test_overlap_pushed_back_by_length_plus_s0(self, tmp_path):
        # second lands rear-of-first minus s_0: 2.0 - 0.18 - 0.09 = 1.73,
        # a net -0.27 from the blocker's front bumper
        config = self.config(tmp_path, (
            "  - {id: 1, path: track, p: 2.0, v: 0.0, idm: desk}\n"
            "  - {id: 2, path: track, p: 2.05, v: 0.0, idm: desk}"))
        states = spawn_vehicles(config)
        assert states[0].p == 2.0
        assert states[1].p == pytest.approx(2.0 - 0.18 - 0.09)

    def test_pushback_cascades(self, tmp_path):
        config = self.config(tmp_path, (
            "  - {id: 1, path: track, p: 2.0, v: 0.0, idm: desk}\n"
            "  - {id: 2, path: track, p: 2.0, v: 0.0, idm: desk}\n"
            "  - {id: 3, path: track, p: 2.0, v: 0.0, idm: desk}"))
        states = spawn_vehicles(config)
        assert states[1].p == pytest.approx(1.73)
        assert states[2].p == pytest.approx(1.46)

    def test_exact_touch_counts_as_overlap(self, tmp_path):
        # rear of leader == front of follower: closed-interval contact
        config = self.config(tmp_path, (
            "  - {id: 1, path: track, p: 2.0, v: 0.0, idm: desk}\n"
            "  - {id: 2, path: track, p: 1.82, v: 0.0, idm: desk}"))
        states = spawn_vehicles(config)
        assert states[1].p == pytest.approx(1.73)

    def test_listed_order_wins(self, tmp_path):
        # the later entry moves even when it was requested further ahead
        config = self.config(tmp_path, (
            "  - {id: 5, path: track, p: 2.0, v: 0.0, idm: desk}\n"
            "  - {id: 4, path: track, p: 2.1, v: 0.0, idm: desk}"))
        states = spawn_vehicles(config)
        assert states[0].p == 2.0
        assert states[1].p == pytest.approx(1.73)

    def test_path_too_short(self, tmp_path):
        write_path(tmp_path, body="LINE 0.0 0.0 1.0 0.0\n")
        rows = "\n".join(
            f"  - {{id: {i}, path: track, p: 0.5, v: 0.0, idm: desk}}"
            for i in range(1, 51))
        text = f"""
scale: 25
physics_dt: 0.01
planner_dt: 0.1
duration: 10
paths:
  track: track.path
idm:
  desk: {{u_max: 0.06, u_min: -0.12, v_max: 0.3, s_0: 0.09, T: 1.0}}
vehicles:
{rows}
"""
        config = parse_scenario(text, base_dir=str(tmp_path))
        with pytest.raises(PathTooShort):
            spawn_vehicles(config)

    def test_bundled_roundabout_spawns_clean(self):
        states = spawn_vehicles(load_scenario(BUNDLED))
        assert len(states) == 6
        # initial conditions are already feasible: nothing moved
        by_id = {s.vehicle_id: s for s in states}
        assert by_id[1].p == pytest.approx(1.90 - 1.28)
        assert by_id[4].p == pytest.approx(1.30)
