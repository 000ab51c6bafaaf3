"""Shared test helpers: schema-conforming observations and small programs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from rewardforge.schema import COURSE_FIELDS, OBS_FIELD_NAMES, OBS_FIELDS

_OBS_DEFAULTS = {
    "centerline_progress": 100.0,
    "lap": 0.0,
    "lateral_offset": 0.5,
    "speed": 20.0,
    "heading_error": 0.05,
    "steering": 0.1,
    "throttle": 0.6,
    "off_course": 0.0,
    "collision": 0.0,
    "collision_rel_speed": 0.0,
    "rank": 3.0,
    "dist_ahead": 40.0,
    "dist_behind": 60.0,
    "time": 12.0,
}

_COURSE_DEFAULTS = {"total_length": 1200.0, "half_width": 6.0}

assert set(_OBS_DEFAULTS) == {f.name for f in OBS_FIELDS}
assert set(_COURSE_DEFAULTS) == {f.name for f in COURSE_FIELDS}


def make_obs(**over: float) -> dict[str, float]:
    obs = dict(_OBS_DEFAULTS)
    for k, v in over.items():
        if k not in obs:
            raise KeyError(k)
        obs[k] = float(v)
    return obs


def make_course(**over: float) -> dict[str, float]:
    course = dict(_COURSE_DEFAULTS)
    for k, v in over.items():
        if k not in course:
            raise KeyError(k)
        course[k] = float(v)
    return course


# ------------------------------------------- graded-program preference store

_OBS_IDX = {n: i for i, n in enumerate(OBS_FIELD_NAMES)}

# drift weight per program; higher weight = worse program AND worse driving
TREND_WEIGHTS = (0.0, 0.6, 1.2, 2.5, 5.0)


def trend_program_source(lam: float) -> str:
    return (
        "pace = cur.speed\n"
        "drift = cur.lateral_offset\n"
        f"weights: pace = 1.0, drift = {lam}\n"
    )


def build_trend_store(
    root,
    n_records: int = 400,
    flip_prob: float = 0.2,
    seed: int = 0,
    trajs_per_program: int = 8,
    T: int = 100,
):
    """Preference store over five reward programs of graded quality.

    Program m gives weight TREND_WEIGHTS[m] to a lateral-drift term; its
    driving degrades in step (worse finishing place, slower, longer car
    contact).  Labels come from a noisy race oracle over cross-program
    pairs, so alignment with the labels separates the programs once
    enough labels are sampled.

    Returns (store, sources) where sources[m] is program m's text.
    """
    from rewardforge.alignment import PreferenceRecord, PreferenceStore, utc_now
    from rewardforge.env.metrics import Thresholds
    from rewardforge.env.trajectory import Trajectory
    from rewardforge.judge import noisy_oracle_judge

    dt = 0.1
    rng = np.random.default_rng(seed)
    store = PreferenceStore(Path(root))
    sources = [trend_program_source(lam) for lam in TREND_WEIGHTS]

    refs: list[list[str]] = []
    for m, source in enumerate(sources):
        row = []
        for _ in range(trajs_per_program):
            place = float(np.clip(round(m * 4 + rng.normal(0.0, 2.0)), 0, 19))
            speed = 40.0 - place
            lat = rng.normal(0.0, 3.0)
            coll_s = max(0.0, m * 0.3 + rng.normal(0.0, 0.15))
            obs = np.zeros((T, len(OBS_FIELD_NAMES)))
            time = np.arange(T) * dt
            obs[:, _OBS_IDX["time"]] = time
            obs[:, _OBS_IDX["speed"]] = speed
            obs[:, _OBS_IDX["rank"]] = place
            obs[:, _OBS_IDX["lateral_offset"]] = lat
            obs[:, _OBS_IDX["centerline_progress"]] = (time * speed) % 400.0
            k = int(round(coll_s / dt))
            if k:
                obs[: k, _OBS_IDX["collision"]] = 1.0
            traj = Trajectory(
                obs,
                np.zeros((T, 2)),
                dt=dt,
                seed=int(rng.integers(1 << 31)),
                metadata={
                    "n_cars": 20,
                    "program_source": source,
                    "course_fields": {"total_length": 400.0, "half_width": 6.0},
                },
            )
            row.append(store.add_trajectory(traj))
        refs.append(row)

    judge = noisy_oracle_judge(
        flip_prob, seed + 1, thresholds=Thresholds(2.5, 1.0)
    )
    for _ in range(n_records):
        a, b = rng.choice(len(sources), size=2, replace=False)
        ref_a = refs[a][rng.integers(trajs_per_program)]
        ref_b = refs[b][rng.integers(trajs_per_program)]
        if rng.random() < 0.5:  # randomize presentation order
            ref_a, ref_b = ref_b, ref_a
        verdict = judge(store.trajectory(ref_a), store.trajectory(ref_b), "win")
        store.add(
            PreferenceRecord(
                p=verdict.preferred,
                traj_i=ref_a,
                traj_j=ref_b,
                judge_id=judge.judge_id,
                iteration=0,
                created_at=utc_now(),
            )
        )
    return store, sources
