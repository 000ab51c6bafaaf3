"""Regenerate courses/thresholds.json from the reference controller bundle.

Runs the centerline reference controller for five seeds on every built-in
layout under full race conditions and prints the per-race collision and
course-out times. The shipped thresholds are the bundle maxima rounded up
with ~1 s of slack.
"""

from __future__ import annotations

from rewardforge.env import (
    CourseSpec,
    EpisodeConfig,
    centerline_controller,
    make_course,
    rollout,
)

LAYOUTS = ("oval", "s_curve", "maggiore_like")
SEEDS = range(5)


def main() -> None:
    coll_times: list[float] = []
    out_times: list[float] = []
    for layout in LAYOUTS:
        course = make_course(CourseSpec(layout=layout))
        for seed in SEEDS:
            cfg = EpisodeConfig(laps=2, n_opponents=19)
            traj = rollout(centerline_controller(30.0), course, cfg, seed=seed)
            cols = traj.columns()
            ct = float(cols["collision"].sum()) * traj.dt
            ot = float(cols["off_course"].sum()) * traj.dt
            coll_times.append(ct)
            out_times.append(ot)
            print(f"{layout:14s} seed={seed} collision={ct:5.2f}s course_out={ot:5.2f}s")
    print(f"bundle max: collision={max(coll_times):.2f}s course_out={max(out_times):.2f}s")


if __name__ == "__main__":
    main()
