"""Judge, ranking, and clip-pipeline tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rewardforge.alignment import PreferenceRecord, utc_now
from rewardforge.env import Thresholds, Trajectory
from rewardforge.generation import LLMTransportError, RecordingClient, ScriptedLLMClient
from rewardforge.judge import (
    CLIP_SECONDS,
    FPS,
    TRANSPORT_RETRIES,
    JudgeFormatError,
    JudgeVerdict,
    LLMJudge,
    Modality,
    NoisyOracleJudge,
    OracleJudge,
    bradley_terry,
    capped_rows,
    clip_frames,
    llm_judge_pipeline,
    noisy_oracle_judge,
    oracle_judge,
    pairwise_judge,
    parse_preference,
    race_fitness,
    render_clip,
    select_best,
    win_matrix,
)
from rewardforge.judge.ranking import SMOOTHING
from rewardforge.schema import OBS_FIELD_NAMES

_IDX = {n: i for i, n in enumerate(OBS_FIELD_NAMES)}
THRESH = Thresholds(max_collision_time=2.5, max_course_out_time=1.0)
GOAL = "win the race without contact"


def rtraj(final_rank, collision_s=0.0, lap_at=None, T=100, dt=0.1, seed=0, speed=30.0):
    """Synthetic race trajectory with a chosen finishing rank."""
    obs = np.zeros((T, len(OBS_FIELD_NAMES)))
    time = np.arange(T) * dt
    obs[:, _IDX["time"]] = time
    obs[:, _IDX["speed"]] = speed
    obs[:, _IDX["rank"]] = final_rank
    obs[:, _IDX["centerline_progress"]] = (time * speed) % 400.0
    k = int(round(collision_s / dt))
    if k:
        obs[:k, _IDX["collision"]] = 1.0
    if lap_at is not None:
        obs[:, _IDX["lap"]] = (time >= lap_at).astype(float)
    meta = {"n_cars": 20, "course_fields": {"total_length": 400.0, "half_width": 6.0}}
    return Trajectory(obs, np.zeros((T, 2)), dt=dt, seed=seed, metadata=meta)


def record(i, j, p, judge="oracle"):
    return PreferenceRecord(
        p=p, traj_i=i, traj_j=j, judge_id=judge, iteration=1, created_at=utc_now(),
    )


class ConstantJudge:
    """Always prefers whichever trajectory is presented first."""

    judge_id = "first-presented"

    def __call__(self, first, second, goal):
        return JudgeVerdict(preferred=0)


class FlakyJudge:
    judge_id = "flaky"

    def __init__(self, failures, inner):
        self.failures = failures
        self.inner = inner
        self.attempts = 0

    def __call__(self, first, second, goal):
        self.attempts += 1
        if self.attempts <= self.failures:
            raise LLMTransportError("transport down")
        return self.inner(first, second, goal)


class FlakyClient:
    """Raises a transport error for the first `fail_times` calls."""

    def __init__(self, inner, fail_times):
        self.inner = inner
        self.remaining = fail_times
        self.failures = 0

    def complete(self, messages, **params):
        if self.remaining > 0:
            self.remaining -= 1
            self.failures += 1
            raise LLMTransportError("connection reset")
        return self.inner.complete(messages, **params)


# ------------------------------------------------------------ verdict & pairs


class TestPairwiseJudge:
    def test_verdict_must_pick_a_side(self):
        with pytest.raises(ValueError):
            JudgeVerdict(preferred=2)

    def test_pair_count_is_n_choose_2(self):
        trajs = [rtraj(r) for r in range(4)]
        records = pairwise_judge(ConstantJudge(), trajs, GOAL, seed=3)
        assert len(records) == 6
        pairs = {frozenset((r.traj_i, r.traj_j)) for r in records}
        assert len(pairs) == 6

    def test_needs_two(self):
        with pytest.raises(ValueError):
            pairwise_judge(ConstantJudge(), [rtraj(0)], GOAL)

    def test_oracle_prefers_better_rank(self):
        worse, better = rtraj(3, seed=1), rtraj(1, seed=2)
        records = pairwise_judge(oracle_judge(thresholds=THRESH), [worse, better], GOAL, seed=0)
        (rec,) = records
        winner = rec.traj_i if rec.p == 0 else rec.traj_j
        assert winner == better.content_hash()

    def test_records_follow_presentation_order(self):
        trajs = [rtraj(r, seed=r) for r in range(4)]
        records = pairwise_judge(ConstantJudge(), trajs, GOAL, seed=9)
        # the constant judge prefers the first presented, so p is always 0
        assert all(r.p == 0 for r in records)

    def test_same_seed_is_deterministic(self):
        trajs = [rtraj(r, seed=r) for r in range(5)]
        a = pairwise_judge(ConstantJudge(), trajs, GOAL, iteration=2, seed=11)
        b = pairwise_judge(ConstantJudge(), trajs, GOAL, iteration=2, seed=11)
        assert [(r.traj_i, r.traj_j, r.p) for r in a] == [
            (r.traj_i, r.traj_j, r.p) for r in b
        ]
        assert all(r.iteration == 2 for r in a)

    def test_seed_shuffles_presentation(self):
        trajs = [rtraj(r, seed=r) for r in range(5)]
        a = pairwise_judge(ConstantJudge(), trajs, GOAL, seed=0)
        b = pairwise_judge(ConstantJudge(), trajs, GOAL, seed=1)
        assert [(r.traj_i, r.traj_j) for r in a] != [(r.traj_i, r.traj_j) for r in b]

    def test_transport_errors_retried(self):
        flaky = FlakyJudge(failures=TRANSPORT_RETRIES - 1, inner=ConstantJudge())
        records = pairwise_judge(flaky, [rtraj(0, seed=0), rtraj(1, seed=1)], GOAL)
        assert len(records) == 1
        assert flaky.attempts == TRANSPORT_RETRIES

    def test_transport_retries_exhausted(self):
        flaky = FlakyJudge(failures=99, inner=ConstantJudge())
        with pytest.raises(LLMTransportError):
            pairwise_judge(flaky, [rtraj(0, seed=0), rtraj(1, seed=1)], GOAL)
        assert flaky.attempts == TRANSPORT_RETRIES


# ----------------------------------------------------------- oracle judges


class TestOracleJudge:
    def test_fitness_orders_by_place(self):
        assert race_fitness(rtraj(1), THRESH) > race_fitness(rtraj(3), THRESH)

    def test_fitness_ties_break_on_collision_time(self):
        clean = race_fitness(rtraj(2, collision_s=0.0), THRESH)
        bumpy = race_fitness(rtraj(2, collision_s=1.5), THRESH)
        assert clean > bumpy

    def test_disqualification_beats_raw_place(self):
        # heavy contact sends a front-runner to last place
        dq = race_fitness(rtraj(0, collision_s=5.0), THRESH)
        mid = race_fitness(rtraj(10), THRESH)
        assert mid > dq
        assert dq[0] == -19

    def test_oracle_prefers_either_presentation(self):
        judge = oracle_judge(thresholds=THRESH)
        better, worse = rtraj(0, seed=1), rtraj(7, seed=2)
        assert judge(better, worse, GOAL).preferred == 0
        assert judge(worse, better, GOAL).preferred == 1

    def test_equal_fitness_defaults_to_first(self):
        judge = oracle_judge(thresholds=THRESH)
        a, b = rtraj(4, seed=1), rtraj(4, seed=2)
        assert judge(a, b, GOAL).preferred == 0
        assert judge(b, a, GOAL).preferred == 0

    def test_custom_fitness_fn(self):
        judge = oracle_judge(fitness_fn=lambda t: float(t.columns()["speed"].mean()))
        slow, fast = rtraj(0, speed=20.0, seed=1), rtraj(0, speed=40.0, seed=2)
        assert judge(slow, fast, GOAL).preferred == 1

    def test_rationale_mentions_fitness(self):
        verdict = oracle_judge(thresholds=THRESH)(rtraj(1, seed=1), rtraj(3, seed=2), GOAL)
        assert "fitness" in verdict.rationale


class TestNoisyOracleJudge:
    def test_flip_prob_validated(self):
        for bad in (-0.1, 0.6, 1.0):
            with pytest.raises(ValueError):
                noisy_oracle_judge(bad, seed=0)

    def test_zero_noise_matches_oracle(self):
        oracle = oracle_judge(thresholds=THRESH)
        noisy = noisy_oracle_judge(0.0, seed=5, thresholds=THRESH)
        pairs = [(rtraj(a, seed=a), rtraj(b, seed=100 + b)) for a, b in [(0, 3), (5, 2), (9, 9)]]
        for first, second in pairs:
            assert noisy(first, second, GOAL).preferred == oracle(first, second, GOAL).preferred

    def test_half_noise_flips_about_half(self):
        noisy = noisy_oracle_judge(0.5, seed=123, thresholds=THRESH)
        better, worse = rtraj(0, seed=1), rtraj(9, seed=2)
        flips = sum(noisy(better, worse, GOAL).preferred == 1 for _ in range(1000))
        assert abs(flips / 1000 - 0.5) < 0.03

    def test_seeded_reproducibility(self):
        a = noisy_oracle_judge(0.3, seed=7, thresholds=THRESH)
        b = noisy_oracle_judge(0.3, seed=7, thresholds=THRESH)
        better, worse = rtraj(0, seed=1), rtraj(9, seed=2)
        seq_a = [a(better, worse, GOAL).preferred for _ in range(50)]
        seq_b = [b(better, worse, GOAL).preferred for _ in range(50)]
        assert seq_a == seq_b
        assert 0 < sum(seq_a) < 50  # noise actually fired

    def test_flipped_verdicts_are_marked(self):
        noisy = noisy_oracle_judge(0.5, seed=123, thresholds=THRESH)
        better, worse = rtraj(0, seed=1), rtraj(9, seed=2)
        for _ in range(50):
            verdict = noisy(better, worse, GOAL)
            assert verdict.rationale.endswith("(flipped)") == (verdict.preferred == 1)

    def test_judge_id_encodes_noise(self):
        assert noisy_oracle_judge(0.25, seed=0).judge_id == "noisy-oracle:0.25"


# --------------------------------------------------------------- ranking

REFS4 = ["t0", "t1", "t2", "t3"]


def smoothed_loglik(b, w):
    """Independent Bradley-Terry log-likelihood: sum over ordered pairs of
    w[i, j] * log(b_i / (b_i + b_j)). Accepts vectorized strength grids."""
    b = np.asarray(b, dtype=float)
    n = w.shape[0]
    ll = np.zeros(b.shape[1:] if b.ndim > 1 else ())
    for i in range(n):
        for j in range(n):
            if i != j and w[i, j]:
                ll = ll + w[i, j] * np.log(b[i] / (b[i] + b[j]))
    return ll


def grid_search_two(w):
    """Fine grid over the 2-agent simplex (strengths sum to 2)."""
    b0 = np.linspace(0.005, 1.995, 3_981)
    ll = smoothed_loglik(np.stack([b0, 2.0 - b0]), w)
    return float(b0[np.argmax(ll)])


def grid_search_three(w):
    """Coarse-then-fine grid over the 3-agent simplex (sum 3)."""
    def best_on(b0, b1):
        g0, g1 = np.meshgrid(b0, b1, indexing="ij")
        g2 = 3.0 - g0 - g1
        ok = g2 > 1e-3
        ll = np.where(ok, smoothed_loglik(np.stack([g0, g1, np.where(ok, g2, 1.0)]), w), -np.inf)
        k = np.unravel_index(np.argmax(ll), ll.shape)
        return float(g0[k]), float(g1[k])

    coarse = np.arange(0.02, 2.98, 0.02)
    c0, c1 = best_on(coarse, coarse)
    fine0 = np.arange(max(c0 - 0.03, 1e-3), c0 + 0.03, 0.001)
    fine1 = np.arange(max(c1 - 0.03, 1e-3), c1 + 0.03, 0.001)
    f0, f1 = best_on(fine0, fine1)
    return np.array([f0, f1, 3.0 - f0 - f1])


class TestWinMatrix:
    def test_counts(self):
        records = [record("t0", "t1", 0), record("t0", "t1", 0), record("t1", "t0", 0),
                   record("t2", "t0", 1)]
        w = win_matrix(records, ["t0", "t1", "t2"])
        expected = np.array([[0, 2, 1], [1, 0, 0], [0, 0, 0]], dtype=float)
        assert np.array_equal(w, expected)

    def test_unknown_ref_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            win_matrix([record("t0", "mystery", 0)], ["t0", "t1"])


class TestBradleyTerry:
    def test_two_agent_strengths_match_grid_search(self):
        records = [record("a", "b", 0)] * 3 + [record("a", "b", 1)]
        result = bradley_terry(records, ["a", "b"])
        assert result.converged
        assert result.strengths[0] > result.strengths[1]
        assert math.isclose(result.strengths.sum(), 2.0, rel_tol=1e-9)
        w = result.win_matrix + SMOOTHING
        np.fill_diagonal(w, 0.0)
        assert abs(result.strengths[0] - grid_search_two(w)) < 2e-3

    def test_three_agent_strengths_match_grid_search(self):
        records = (
            [record("a", "b", 0)] * 4
            + [record("a", "c", 0)] * 2 + [record("a", "c", 1)]
            + [record("b", "c", 0)] * 2 + [record("b", "c", 1)] * 2
        )
        refs = ["a", "b", "c"]
        result = bradley_terry(records, refs)
        w = result.win_matrix + SMOOTHING
        np.fill_diagonal(w, 0.0)
        assert np.max(np.abs(result.strengths - grid_search_three(w))) < 3e-3

    def test_cycle_gives_equal_strengths(self):
        records = [record("a", "b", 0), record("b", "c", 0), record("c", "a", 0)]
        result = bradley_terry(records, ["a", "b", "c"])
        assert result.converged
        assert np.max(np.abs(result.strengths - 1.0)) < 1e-6
        assert result.best_index == 0  # tie resolved to the lowest index

    def test_transitive_tournament_ordering(self):
        records = (
            [record("a", "b", 0)] * 2 + [record("a", "c", 0)] * 2
            + [record("b", "c", 0)] * 2
        )
        result = bradley_terry(records, ["a", "b", "c"])
        s = result.strengths
        assert s[0] > s[1] > s[2]
        assert select_best(result) == 0

    def test_win_matrix_is_raw_counts(self):
        records = [record("a", "b", 0), record("a", "b", 1)]
        result = bradley_terry(records, ["a", "b"])
        assert np.array_equal(result.win_matrix, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_symmetric_record_yields_unit_strengths(self):
        records = [record("a", "b", 0), record("a", "b", 1)]
        result = bradley_terry(records, ["a", "b"])
        assert np.allclose(result.strengths, 1.0, atol=1e-9)

    def test_needs_two_agents(self):
        with pytest.raises(ValueError):
            bradley_terry([], ["only"])

    def test_unjudged_agent_rejected(self):
        records = [record("t0", "t1", 0)]
        with pytest.raises(ValueError, match="never judged"):
            bradley_terry(records, ["t0", "t1", "ghost"])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_label_invariance_under_permutation(self, seed):
        rng = np.random.default_rng(seed)
        n = 4
        records = []
        for i in range(n):
            for j in range(i + 1, n):
                for _ in range(int(rng.integers(1, 4))):
                    records.append(record(REFS4[i], REFS4[j], int(rng.integers(0, 2))))
        base = bradley_terry(records, REFS4)
        perm = rng.permutation(n)
        shuffled_refs = [REFS4[k] for k in perm]
        shuffled = bradley_terry(records, shuffled_refs)
        # strength follows the agent, not its slot
        for slot, k in enumerate(perm):
            assert math.isclose(shuffled.strengths[slot], base.strengths[k], rel_tol=1e-6)


# ------------------------------------------------- end-to-end oracle ranking


class TestOracleRanking:
    def test_hand_ranked_field_recovered(self):
        # five agents whose finishing places are known by construction
        places = [3, 0, 4, 1, 2]
        trajs = [rtraj(p, seed=k) for k, p in enumerate(places)]
        refs = [t.content_hash() for t in trajs]
        records = pairwise_judge(oracle_judge(thresholds=THRESH), trajs, GOAL, seed=17)
        assert len(records) == 10
        result = bradley_terry(records, refs)
        assert result.converged
        # strengths must sort agents exactly opposite to finishing place
        order = np.argsort(-result.strengths)
        assert [places[k] for k in order] == [0, 1, 2, 3, 4]
        assert select_best(result) == places.index(0)

    def test_noisy_ranking_still_finds_winner(self):
        places = [4, 1, 0, 3, 2]
        trajs = [rtraj(p, seed=k) for k, p in enumerate(places)]
        refs = [t.content_hash() for t in trajs]
        judge = noisy_oracle_judge(0.1, seed=2, thresholds=THRESH)
        records = []
        for trial in range(5):  # repeated tournaments wash out label noise
            records.extend(pairwise_judge(judge, trajs, GOAL, seed=trial))
        result = bradley_terry(records, refs)
        assert select_best(result) == places.index(0)


# ------------------------------------------------------------ clip pipeline


def scripted_judge(responses, modality=Modality.BOTH, **kwargs):
    client = ScriptedLLMClient(responses)
    return llm_judge_pipeline(client, modality=modality, **kwargs), client


class TestClipArithmetic:
    def test_45s_makes_three_clips(self):
        traj = rtraj(0, T=450)
        assert len(clip_frames(traj)) == 3
        assert all(len(c) == CLIP_SECONDS * FPS for c in clip_frames(traj))

    def test_short_runs_still_make_one_clip(self):
        assert len(clip_frames(rtraj(0, T=50))) == 1
        assert len(clip_frames(rtraj(0, T=200))) == 1  # 20 s: remainder dropped

    def test_lap_completion_caps_footage(self):
        traj = rtraj(0, T=450, lap_at=10.0)
        rows = capped_rows(traj, max_video_seconds=180.0)
        assert float(rows[-1, _IDX["time"]]) == pytest.approx(10.0)
        assert len(clip_frames(traj)) == 1

    def test_wall_clock_caps_footage(self):
        traj = rtraj(0, T=2000)  # 200 s, never finishes a lap
        assert len(capped_rows(traj, max_video_seconds=180.0)) == 1801
        assert len(clip_frames(traj)) == 12

    def test_resampling_hits_frame_rate(self):
        traj = rtraj(0, T=900, dt=0.05)  # 45 s at 20 ticks per second
        clips = clip_frames(traj)
        assert len(clips) == 3
        times = clips[0][:, _IDX["time"]]
        assert np.allclose(np.diff(times), 1.0 / FPS)


class TestClipRendering:
    def test_image_modality_hides_controls(self):
        frames = clip_frames(rtraj(0, T=50))[0]
        text = render_clip(frames, Modality.IMAGE)
        assert "speed=" in text and "lap=" in text
        for hidden in ("steering=", "throttle=", "heading_error=", "collision_rel_speed="):
            assert hidden not in text

    def test_full_state_modalities_include_controls(self):
        frames = clip_frames(rtraj(0, T=50))[0]
        for modality in (Modality.TRAJECTORY, Modality.BOTH):
            text = render_clip(frames, modality)
            assert "steering=" in text and "throttle=" in text

    def test_one_line_per_frame(self):
        frames = clip_frames(rtraj(0, T=50))[0]
        assert len(render_clip(frames, Modality.BOTH).splitlines()) == len(frames)


class TestParsePreference:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ('("preferred_agent": 1)', 1),
            ('("preferred_agent": 2)', 2),
            ("preferred_agent: 2", 2),
            ('"preferred_agent" = 1', 1),
            ('I lean 1 early, but finally ("preferred_agent": 2)', 2),
            ('("preferred_agent": 1) ... wait, ("preferred_agent": 2)', 2),
            ("agent 2 is better", None),
            ("", None),
        ],
    )
    def test_variants(self, text, expected):
        assert parse_preference(text) == expected


class TestLLMJudge:
    def test_three_clip_calls_plus_final(self):
        judge, client = scripted_judge(["d1", "d2", "d3", '("preferred_agent": 2)'])
        verdict = judge(rtraj(0, T=450, seed=1), rtraj(1, T=450, seed=2), GOAL)
        assert verdict.preferred == 1
        assert len(client.calls) == 4
        assert [e["kind"] for e in judge.transcript] == ["clip", "clip", "clip", "final"]

    def test_prefers_first_agent(self):
        judge, _ = scripted_judge(["d1", '("preferred_agent": 1)'])
        verdict = judge(rtraj(0, T=50, seed=1), rtraj(1, T=50, seed=2), GOAL)
        assert verdict.preferred == 0

    def test_prompts_carry_goal_and_clip_position(self):
        judge, client = scripted_judge(["d1", "d2", "d3", '("preferred_agent": 1)'])
        judge(rtraj(0, T=450, seed=1), rtraj(1, T=450, seed=2), GOAL)
        second_clip = client.calls[1][-1]["content"]
        assert GOAL in second_clip and "Clip 2 of 3" in second_clip
        final = client.calls[3][-1]["content"]
        assert "Clip 1: d1" in final and "Clip 3: d3" in final

    def test_unequal_lengths_note_missing_footage(self):
        judge, client = scripted_judge(["d1", "d2", "d3", '("preferred_agent": 1)'])
        judge(rtraj(0, T=450, seed=1), rtraj(1, T=100, seed=2), GOAL)
        assert "no footage" in client.calls[2][-1]["content"]

    def test_unparseable_final_reprompts_once(self):
        judge, client = scripted_judge(["d1", "the second agent, clearly", '("preferred_agent": 2)'])
        verdict = judge(rtraj(0, T=50, seed=1), rtraj(1, T=50, seed=2), GOAL)
        assert verdict.preferred == 1
        assert len(client.calls) == 3
        assert [e["kind"] for e in judge.transcript] == ["clip", "final", "reprompt"]
        # the reprompt replays the failed answer and restates the format
        reprompt = client.calls[2]
        assert reprompt[-2]["content"] == "the second agent, clearly"
        assert "preferred_agent" in reprompt[-1]["content"]

    def test_two_unparseable_answers_fault(self):
        judge, _ = scripted_judge(["d1", "hmm", "still prose"])
        with pytest.raises(JudgeFormatError):
            judge(rtraj(0, T=50, seed=1), rtraj(1, T=50, seed=2), GOAL)

    def test_transport_errors_retried_per_call(self):
        inner = ScriptedLLMClient(["d1", '("preferred_agent": 1)'])
        flaky = FlakyClient(inner, fail_times=2)
        judge = llm_judge_pipeline(flaky)
        verdict = judge(rtraj(0, T=50, seed=1), rtraj(1, T=50, seed=2), GOAL)
        assert verdict.preferred == 0
        assert flaky.failures == 2

    def test_transport_retries_exhausted(self):
        flaky = FlakyClient(ScriptedLLMClient(["never reached"]), fail_times=99)
        judge = llm_judge_pipeline(flaky)
        with pytest.raises(LLMTransportError):
            judge(rtraj(0, T=50, seed=1), rtraj(1, T=50, seed=2), GOAL)
        assert flaky.failures == 3

    def test_judge_id_encodes_modality(self):
        client = ScriptedLLMClient([])
        assert llm_judge_pipeline(client).judge_id == "llm:both"
        assert llm_judge_pipeline(client, modality=Modality.IMAGE).judge_id == "llm:image"

    def test_recorded_transcript_replays_to_same_verdict(self, tmp_path):
        first, second = rtraj(0, T=450, seed=1), rtraj(1, T=450, seed=2)
        scripted = ScriptedLLMClient(["d1", "d2", "d3", '("preferred_agent": 2)'])
        recorder = RecordingClient(scripted)
        live = llm_judge_pipeline(recorder)(first, second, GOAL)
        path = tmp_path / "transcript.json"
        recorder.save(path)

        replayed = llm_judge_pipeline(RecordingClient.replay_client(path))(first, second, GOAL)
        assert replayed == live

    def test_llm_judge_feeds_pairwise(self):
        responses = []
        for _ in range(3):  # C(3,2) pairs, one clip each
            responses += ["description", '("preferred_agent": 1)']
        client = ScriptedLLMClient(responses)
        trajs = [rtraj(r, T=50, seed=r) for r in range(3)]
        records = pairwise_judge(llm_judge_pipeline(client), trajs, GOAL, seed=4)
        assert len(records) == 3
        assert all(r.judge_id == "llm:both" for r in records)
        assert all(r.p == 0 for r in records)
