"""Paths are chains of line and arc segments, addressed by arc length.

This walk-through builds the desk-scale roundabout entry leg by hand:
a straight approach, a quarter turn, and a short straight to the merge
point. Everything downstream (controllers, planner, logs) talks about
positions on a path as one number s, so the two operations that matter
are pose_at(s) and project(x, y) back to the nearest s.
"""

import math

from cavsim.geometry import Arc, Line, build_path, pose_at, project


def main():
    path = build_path([
        Line(-3.0, -1.5, -1.5, -1.5),
        Arc(-1.5, -0.5, 1.0, -math.pi / 2, math.pi / 2),
        Line(-0.5, -0.5, -0.5, 0.0),
    ])
    print(f"total length: {path.length:.4f} m")
    print(f"{'s':>6} {'x':>8} {'y':>8} {'yaw':>8} {'curvature':>10}")
    for k in range(9):
        s = path.length * k / 8
        p = pose_at(path, s)
        kappa = project(path, p.x, p.y, hint_s=s).curvature
        print(f"{s:6.3f} {p.x:8.4f} {p.y:8.4f} {p.yaw:8.4f} {kappa:10.4f}")

    # Projection is the inverse: drop a point next to the curve and ask
    # where on the path it belongs. The lateral error is signed, positive
    # to the left of the direction of travel.
    px, py = -1.0, -1.3
    proj = project(path, px, py)
    print(f"\npoint ({px}, {py}) projects to s={proj.s:.4f}, "
          f"lateral error {proj.lateral_error:+.4f} m")

    # A hint makes projection local, which is what a moving vehicle wants:
    # it cannot teleport, so the nearest point is near the previous one.
    proj2 = project(path, px, py, hint_s=proj.s)
    assert abs(proj2.s - proj.s) < 1e-9
    print("projection with a warm hint agrees to 1e-9")


if __name__ == "__main__":
    main()
