"""Preference store and trajectory alignment coefficient tests."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rewardforge.alignment as alignment
from rewardforge.alignment import (
    TIE,
    PreferenceRecord,
    PreferenceStore,
    avg_reward,
    induced_pref,
    tac,
    top_n_filter,
    utc_now,
)
from rewardforge.dsl import evaluate, parse
from rewardforge.env import CourseSpec, EpisodeConfig, Trajectory, make_course, rollout
from rewardforge.schema import OBS_FIELD_NAMES

COURSE_FIELDS = {"total_length": 400.0, "half_width": 6.0}
_IDX = {n: i for i, n in enumerate(OBS_FIELD_NAMES)}

PACE = parse("pace = cur.speed\nweights: pace = 1.0\n")


def traj(speeds, lats=None, seed=0):
    """Synthetic trajectory with chosen speed (and lateral) columns."""
    T = len(speeds)
    obs = np.zeros((T, len(OBS_FIELD_NAMES)))
    obs[:, _IDX["time"]] = np.arange(T) * 0.1
    obs[:, _IDX["speed"]] = speeds
    if lats is not None:
        obs[:, _IDX["lateral_offset"]] = lats
    meta = {"course_fields": COURSE_FIELDS}
    return Trajectory(obs, np.zeros((T, 2)), dt=0.1, seed=seed, metadata=meta)


def record(i, j, p, judge="oracle", iteration=1):
    return PreferenceRecord(
        p=p, traj_i=i, traj_j=j, judge_id=judge, iteration=iteration,
        created_at=utc_now(),
    )


@pytest.fixture
def store(tmp_path):
    return PreferenceStore(tmp_path / "prefs")


# ---------------------------------------------------------------- avg_reward


class TestAvgReward:
    def test_constant_reward(self):
        prog = parse("flat = 2.0\nweights: flat = 1.0\n")
        assert avg_reward(traj([5, 5, 5]), prog) == 2.0

    def test_arithmetic_mean_of_step_totals(self):
        assert avg_reward(traj([1.0, 2.0, 6.0]), PACE) == pytest.approx(3.0)

    def test_matches_per_step_scalar_oracle(self):
        course = make_course(CourseSpec(layout="oval"))
        cfg = EpisodeConfig(time_limit=8.0, laps=99, n_opponents=2)
        rng = np.random.default_rng(3)
        t = rollout(lambda o: (float(rng.uniform(-1, 1)), 1.0), course, cfg, seed=5)
        prog = parse(
            "pace = cur.speed / 10\n"
            "steady = 0 - abs(cur.lateral_offset)\n"
            "gain = cur.centerline_progress - prev.centerline_progress\n"
            "weights: pace = 1.0, steady = 0.25, gain = 2.0\n"
        )
        total = 0.0
        for k in range(len(t)):
            cur = t.obs_dict(k)
            prev = t.obs_dict(max(0, k - 1))
            total += evaluate(prog, cur, prev, course.fields()).total
        assert avg_reward(t, prog) == pytest.approx(total / len(t), rel=1e-12)

    def test_missing_course_fields_is_an_error(self):
        t = traj([1.0])
        t.metadata.pop("course_fields")
        with pytest.raises(ValueError, match="course_fields"):
            avg_reward(t, PACE)
        assert avg_reward(t, PACE, course_fields=COURSE_FIELDS) == 1.0


# ---------------------------------------------------------------- induced_pref


class TestInducedPref:
    def test_higher_average_wins(self):
        assert induced_pref(PACE, traj([5, 5]), traj([3, 3])) == 0
        assert induced_pref(PACE, traj([1, 1]), traj([3, 3])) == 1

    def test_exact_equality_is_tie(self):
        assert induced_pref(PACE, traj([4, 2]), traj([3, 3])) == TIE

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_negated_weights_flip_non_ties(self, seed):
        rng = np.random.default_rng(seed)
        prog = parse(
            "pace = cur.speed\ndrift = cur.lateral_offset\n"
            f"weights: pace = {rng.uniform(0.1, 3):.6f}, drift = {rng.uniform(0.1, 3):.6f}\n"
        )
        a = traj(rng.uniform(0, 50, 4), rng.uniform(-8, 8, 4))
        b = traj(rng.uniform(0, 50, 4), rng.uniform(-8, 8, 4))
        fwd = induced_pref(prog, a, b)
        rev = induced_pref(prog.with_weights({k: -w for k, w in prog.weights.items()}), a, b)
        if fwd == TIE:
            assert rev == TIE
        else:
            assert rev == 1 - fwd


# ---------------------------------------------------------------- store


class TestPreferenceStore:
    def test_jsonl_append_only_format(self, store):
        a = store.add_trajectory(traj([2, 2]))
        b = store.add_trajectory(traj([1, 1]))
        store.add(record(a, b, 0))
        store.add(record(b, a, 1, judge="human:kai"))
        lines = store.path.read_text().splitlines()
        assert len(lines) == 2
        docs = [json.loads(line) for line in lines]
        assert docs[0]["p"] == 0 and docs[1]["judge_id"] == "human:kai"
        assert [r.to_json() for r in store.records()] == docs

    def test_trajectory_refs_resolve(self, store):
        t = traj([7, 7, 7])
        ref = store.add_trajectory(t)
        assert store.has_trajectory(ref)
        back = store.trajectory(ref)
        assert back.content_hash() == ref
        assert np.array_equal(back.obs, t.obs)

    def test_unknown_ref_rejected(self, store):
        a = store.add_trajectory(traj([2, 2]))
        with pytest.raises(ValueError, match="unknown trajectory"):
            store.add(record(a, "deadbeef", 0))

    def test_binary_p_enforced(self):
        with pytest.raises(ValueError, match="p must be"):
            record("a", "b", 2)

    def test_self_pair_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            record("a", "a", 0)

    def test_labeled_by_is_unordered(self, store):
        a = store.add_trajectory(traj([2, 2]))
        b = store.add_trajectory(traj([1, 1]))
        store.add(record(a, b, 0, judge="human:kai"))
        assert store.labeled_by("human:kai", a, b)
        assert store.labeled_by("human:kai", b, a)
        assert not store.labeled_by("human:ada", a, b)


# ---------------------------------------------------------------- tac


def brute_force_sigma(program, store):
    """Independent enumeration of the alignment formula, no caching."""
    recs = store.records()
    if not recs:
        return 0.0
    P = 0.0
    for r in recs:
        gi = avg_reward(store.trajectory(r.traj_i), program)
        gj = avg_reward(store.trajectory(r.traj_j), program)
        if gi == gj:
            P += 0.5
        elif (0 if gi > gj else 1) == r.p:
            P += 1.0
    return (2 * P - len(recs)) / len(recs)


class TestTac:
    def test_empty_store_is_zero(self, store):
        assert tac(PACE, store) == 0.0

    def test_total_agreement(self, store):
        fast = store.add_trajectory(traj([9, 9]))
        slow = store.add_trajectory(traj([1, 1]))
        for _ in range(10):
            store.add(record(fast, slow, 0))
        assert tac(PACE, store) == 1.0

    def test_total_disagreement(self, store):
        fast = store.add_trajectory(traj([9, 9]))
        slow = store.add_trajectory(traj([1, 1]))
        for _ in range(10):
            store.add(record(fast, slow, 1))
        assert tac(PACE, store) == -1.0

    def test_mixed_with_tie_hand_computed(self, store):
        fast = store.add_trajectory(traj([9, 9]))
        slow = store.add_trajectory(traj([1, 1]))
        even = store.add_trajectory(traj([9, 9], lats=[3, 3]))
        store.add(record(fast, slow, 0))           # agree
        store.add(record(fast, slow, 1))           # disagree
        store.add(record(fast, even, 0))           # induced tie (same speeds)
        # P = 1 + 0 + 0.5 = 1.5 → σ = (3 − 3)/3 = 0
        assert tac(PACE, store) == 0.0

    @given(seed=st.integers(0, 10_000), n_records=st.integers(1, 12))
    @settings(max_examples=25, deadline=None)
    def test_matches_brute_force_enumeration(self, seed, n_records, tmp_path_factory):
        rng = np.random.default_rng(seed)
        store = PreferenceStore(tmp_path_factory.mktemp("s"))
        refs = [
            store.add_trajectory(
                traj(rng.uniform(0, 30, 3), rng.uniform(-5, 5, 3), seed=int(k))
            )
            for k in range(4)
        ]
        for _ in range(n_records):
            i, j = rng.choice(4, size=2, replace=False)
            store.add(record(refs[i], refs[j], int(rng.integers(2))))
        prog = parse(
            "pace = cur.speed\ndrift = cur.lateral_offset\n"
            f"weights: pace = {rng.uniform(-2, 2):.6f}, drift = {rng.uniform(-2, 2):.6f}\n"
        )
        assert tac(prog, store) == brute_force_sigma(prog, store)

    def test_antisymmetry_without_ties(self, store):
        rng = np.random.default_rng(1)
        refs = [store.add_trajectory(traj(rng.uniform(1, 40, 3), seed=k)) for k in range(3)]
        store.add(record(refs[0], refs[1], 0))
        store.add(record(refs[1], refs[2], 1))
        store.add(record(refs[0], refs[2], 0))
        neg = PACE.with_weights({"pace": -1.0})
        assert tac(neg, store) == -tac(PACE, store)

    @given(scale=st.floats(0.001, 1000.0))
    @settings(max_examples=30, deadline=None)
    def test_positive_scale_invariance(self, scale, tmp_path_factory):
        store = PreferenceStore(tmp_path_factory.mktemp("s"))
        a = store.add_trajectory(traj([9, 4]))
        b = store.add_trajectory(traj([2, 2]))
        store.add(record(a, b, 0))
        store.add(record(b, a, 1))
        scaled = PACE.with_weights({"pace": scale})
        assert tac(scaled, store) == tac(PACE, store)

    def test_appending_agreement_raises_raw_count_by_one(self, store):
        fast = store.add_trajectory(traj([9, 9]))
        slow = store.add_trajectory(traj([1, 1]))
        store.add(record(fast, slow, 0))
        store.add(record(fast, slow, 1))
        before = tac(PACE, store) * len(store)
        store.add(record(fast, slow, 0))  # PACE agrees with this one
        after = tac(PACE, store) * len(store)
        assert after == pytest.approx(before + 1.0)


# ---------------------------------------------------------------- top_n


class TestTopNFilter:
    def test_empty_store_keeps_generation_order(self, store):
        programs = [PACE.with_weights({"pace": float(k + 1)}) for k in range(10)]
        kept = top_n_filter(programs, store, 5)
        assert [s.index for s in kept] == [0, 1, 2, 3, 4]
        assert all(s.sigma == 0.0 for s in kept)

    def test_tie_break_by_generation_index(self, store, monkeypatch):
        programs = [object() for _ in range(4)]
        sigmas = {id(p): s for p, s in zip(programs, (0.8, -0.2, 0.8, 0.1))}
        monkeypatch.setattr(alignment, "tac", lambda p, s: sigmas[id(p)])
        kept = top_n_filter(programs, store, 2)
        assert [s.index for s in kept] == [0, 2]
        assert [s.sigma for s in kept] == [0.8, 0.8]

    @given(seed=st.integers(0, 5000))
    @settings(max_examples=40, deadline=None)
    def test_matches_exhaustive_sort_oracle(self, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        store = PreferenceStore(tmp_path_factory.mktemp("s"))
        m = int(rng.integers(2, 9))
        n = int(rng.integers(1, m + 1))
        sigmas = np.round(rng.uniform(-1, 1, m), 1)  # coarse → ties happen
        programs = [object() for _ in range(m)]
        table = {id(p): float(s) for p, s in zip(programs, sigmas)}
        real_tac = alignment.tac
        alignment.tac = lambda p, s: table[id(p)]
        try:
            kept = top_n_filter(programs, store, n)
        finally:
            alignment.tac = real_tac
        oracle = sorted(range(m), key=lambda i: (-sigmas[i], i))[:n]
        assert [s.index for s in kept] == oracle

    def test_n_larger_than_pool_rejected(self, store):
        with pytest.raises(ValueError, match="exceeds"):
            top_n_filter([PACE], store, 2)
