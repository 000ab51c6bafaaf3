"""Run orchestration: durable phases, resume, feedback routing, HTTP API."""

import importlib
import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from rewardforge.alignment import PreferenceStore
from rewardforge.dsl import parse
from rewardforge.env.render import FRAME_HZ
from rewardforge.env.sim import EpisodeConfig
from rewardforge.orchestrator import (
    EvalReport,
    RunConfig,
    RunState,
    StaleArtifactError,
    ablate_buffer,
    collect_feedback,
    create_app,
    evaluate_final,
    iteration_dir,
    label_tasks,
    post_feedback,
    resume,
    run,
    run_overview,
    seed_for,
    submit_label,
)
from rewardforge.orchestrator.cli import _build_parser, _config_from_args
from rewardforge.orchestrator.run import _make_judge
from rewardforge.trainer import EnvConfig, QPolicy, TrainSettings

run_module = importlib.import_module("rewardforge.orchestrator.run")

N_OPPONENTS = 3  # default field: agent + 3 built-in cars


def tiny_config(**over) -> RunConfig:
    base = dict(
        goal="finish first without crashing",
        iterations=2,
        programs_per_iteration=4,
        train_top=2,
        train_budget=1,
        eval_races=4,
        env=EnvConfig(episode=EpisodeConfig(n_opponents=N_OPPONENTS, time_limit=20.0)),
        judge="oracle",
        feedback_source="self",
        seed=11,
        settings=TrainSettings(updates_per_epoch=50, warmup=100),
    )
    base.update(over)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def done(tmp_path_factory):
    """One completed tiny run shared by the read-only tests below."""
    run_dir = tmp_path_factory.mktemp("run")
    result = run(tiny_config(), run_dir)
    return run_dir, result


def oracle_records(run_dir):
    return [r for r in PreferenceStore(run_dir).records() if r.judge_id == "oracle"]


class TestRunConfig:
    def test_round_trip(self, tmp_path):
        cfg = tiny_config(judge="noisy-oracle:0.25", feedback_source="file", feedback_path="f.txt")
        cfg.save(tmp_path / "config.json")
        assert RunConfig.load(tmp_path / "config.json") == cfg

    def test_from_json_fills_defaults(self):
        cfg = RunConfig.from_json({"goal": "win"})
        assert cfg.env == EnvConfig()
        assert cfg.settings == TrainSettings()

    @pytest.mark.parametrize(
        "over",
        [
            {"goal": "  "},
            {"iterations": 0},
            {"train_top": 5},  # exceeds programs_per_iteration=4
            {"train_top": 1},
            {"train_budget": 0},
            {"eval_races": 3},
            {"feedback_source": "carrier-pigeon"},
            {"feedback_source": "file"},  # no feedback_path
            {"judge": "noisy-oracle:0.7"},
            {"judge": "llm:sound"},
            {"judge": "wat"},
        ],
    )
    def test_rejects(self, over):
        with pytest.raises(ValueError):
            tiny_config(**over)

    @pytest.mark.parametrize("judge", ["oracle", "noisy-oracle:0.3", "llm", "llm:image"])
    def test_judge_specs_accepted(self, judge):
        assert tiny_config(judge=judge).judge == judge

    def test_final_budget_defaults_to_ratio(self):
        assert tiny_config(train_budget=3).resolved_final_budget == 15
        assert tiny_config(final_budget=7).resolved_final_budget == 7

    def test_feedback_timeout_defaults(self):
        assert tiny_config(feedback_source="self").resolved_feedback_timeout == 0.0
        assert tiny_config(feedback_source="cli").resolved_feedback_timeout == 0.0
        http = tiny_config(feedback_source="http")
        assert http.resolved_feedback_timeout == 24 * 3600.0
        assert tiny_config(feedback_source="http", feedback_timeout=5.0).resolved_feedback_timeout == 5.0


class TestSeedFor:
    def test_deterministic_and_distinct(self):
        a = seed_for(11, 2, "train", 0)
        assert a == seed_for(11, 2, "train", 0)
        others = {
            seed_for(11, 2, "train", 1),
            seed_for(11, 3, "train", 0),
            seed_for(11, 2, "judge", 0),
            seed_for(12, 2, "train", 0),
        }
        assert a not in others
        assert len(others) == 4

    def test_range(self):
        for i in range(50):
            assert 0 <= seed_for(0, 0, "x", i) < 2**32


class TestRunState:
    def test_create_and_reload(self, tmp_path):
        state = RunState.load_or_create(tmp_path)
        assert (tmp_path / "state.json").exists()
        art = tmp_path / "a.txt"
        art.write_text("payload")
        state.complete(1, "generate", [art], {"n": 3})

        fresh = RunState.load_or_create(tmp_path)
        rec = fresh.lookup(1, "generate")
        assert rec.meta == {"n": 3}
        assert list(rec.artifacts) == ["a.txt"]
        fresh.verify(rec)  # artifact untouched

    def test_verify_detects_tampering(self, tmp_path):
        state = RunState.load_or_create(tmp_path)
        art = tmp_path / "a.txt"
        art.write_text("payload")
        state.complete(1, "generate", [art], {})
        rec = state.lookup(1, "generate")

        art.write_text("edited behind the ledger's back")
        with pytest.raises(StaleArtifactError, match="modified"):
            state.verify(rec)
        art.unlink()
        with pytest.raises(StaleArtifactError, match="missing"):
            state.verify(rec)

    def test_double_complete_rejected(self, tmp_path):
        state = RunState.load_or_create(tmp_path)
        state.complete(1, "rank", [], {})
        with pytest.raises(ValueError, match="already recorded"):
            state.complete(1, "rank", [], {})

    def test_phase_meta_missing(self, tmp_path):
        state = RunState.load_or_create(tmp_path)
        with pytest.raises(KeyError):
            state.phase_meta(1, "rank")

    def test_completed_iterations(self, tmp_path):
        state = RunState.load_or_create(tmp_path)
        state.complete(1, "feedback", [], {})
        state.complete(2, "generate", [], {})
        state.complete(0, "final_train", [], {})
        assert state.completed_iterations() == [1]


class TestRunLayout:
    def test_status_complete(self, done):
        run_dir, _ = done
        view = run_overview(run_dir)
        assert view["status"] == "complete"
        assert view["iterations_completed"] == [1, 2]
        assert view["final"]["trained"]

    def test_directory_layout(self, done):
        run_dir, _ = done
        for name in ("config.json", "state.json", "preferences.jsonl"):
            assert (run_dir / name).is_file()
        assert (run_dir / "frames").is_dir()
        for k in (1, 2):
            it = iteration_dir(run_dir, k)
            for sub in ("rewards", "trajectories", "policies", "transcripts"):
                assert (it / sub).is_dir()
            assert (it / "ranking.json").is_file()
            assert (it / "feedback.txt").is_file()
            assert len(list((it / "rewards").glob("candidate_*.txt"))) == 4
        final = run_dir / "final"
        for name in ("policy.npz", "policy.json", "diagnostics.json", "evaluation.json"):
            assert (final / name).is_file()
        assert list((final / "checkpoints").glob("epoch_*.npz"))

    def test_preference_accounting(self, done):
        run_dir, _ = done
        # 2 iterations x C(2,2)=1 judged pair each
        records = oracle_records(run_dir)
        assert len(records) == 2
        assert sorted(r.iteration for r in records) == [1, 2]

    def test_race_trajectory_metadata(self, done):
        run_dir, _ = done
        state = RunState.load_or_create(run_dir)
        store = PreferenceStore(run_dir)
        meta0 = state.phase_meta(1, "train_0")
        traj = store.trajectory(meta0["ref"])
        # caller metadata merged with the rollout's own
        assert traj.metadata["iteration"] == 1
        assert "weights:" in traj.metadata["program_source"]
        assert traj.metadata["n_cars"] == N_OPPONENTS + 1
        assert "course_fields" in traj.metadata

    def test_frames_stream(self, done):
        run_dir, _ = done
        ref = RunState.load_or_create(run_dir).phase_meta(1, "train_0")["ref"]
        doc = json.loads((run_dir / "frames" / f"{ref}.json").read_text())
        assert doc["ref"] == ref
        assert doc["fps"] == FRAME_HZ
        frames = doc["frames"]
        assert len(frames) > 10
        assert all(len(f["cars"]) == N_OPPONENTS + 1 for f in frames)
        gaps = [round(b["time"] - a["time"], 6) for a, b in zip(frames, frames[1:])]
        assert all(g == pytest.approx(1.0 / FRAME_HZ) for g in gaps)

    def test_secondary_buffer_lineage(self, done):
        run_dir, _ = done
        state = RunState.load_or_create(run_dir)
        best1 = state.phase_meta(1, "rank")["best_slot"]
        for j in range(2):
            assert state.phase_meta(1, f"train_{j}")["secondary"] is None
            assert (
                state.phase_meta(2, f"train_{j}")["secondary"]
                == f"iter_1/policies/agent_{best1}.buffer"
            )
        assert state.phase_meta(0, "final_train")["secondary"] is None

    def test_result_fields(self, done):
        run_dir, result = done
        parse(result.best_source)  # valid program
        assert result.evaluation.races == 4
        assert result.evaluation.retained == 2
        on_disk = EvalReport.from_json(
            json.loads((run_dir / "final" / "evaluation.json").read_text())
        )
        assert on_disk == result.evaluation

    def test_feedback_reaches_next_prompt(self, done):
        run_dir, _ = done
        fb = (iteration_dir(run_dir, 1) / "feedback.txt").read_text().strip()
        assert fb.startswith("## Agent Summary")
        transcript = (iteration_dir(run_dir, 2) / "transcripts" / "generation.json").read_text()
        assert fb.splitlines()[1] in transcript


class TestResume:
    def test_config_mismatch_rejected(self, done):
        run_dir, _ = done
        with pytest.raises(ValueError, match="resume"):
            run(tiny_config(seed=99), run_dir)

    def test_kill_and_resume_matches_fresh_run(self, tmp_path, done):
        fresh_dir, fresh = done

        class Bomb(RuntimeError):
            pass

        calls = {"n": 0}

        def bombing_factory(config, seed, client):
            calls["n"] += 1
            if calls["n"] > 1:
                raise Bomb("judge transport down")
            return _make_judge(config, seed, client)

        run_dir = tmp_path / "crashed"
        with pytest.raises(Bomb):
            run(tiny_config(), run_dir, judge_factory=bombing_factory)
        state = RunState.load_or_create(run_dir)
        assert state.lookup(1, "feedback") is not None  # iteration 1 finished
        assert state.lookup(2, "judge") is None  # died here

        resumed = resume(run_dir)
        assert resumed.best_source == fresh.best_source
        assert resumed.evaluation == fresh.evaluation

        def semantic(records):
            return sorted((r.p, r.traj_i, r.traj_j, r.judge_id, r.iteration) for r in records)

        assert semantic(oracle_records(run_dir)) == semantic(oracle_records(fresh_dir))
        assert (run_dir / "final" / "policy.npz").read_bytes() == (
            fresh_dir / "final" / "policy.npz"
        ).read_bytes()

    def test_resume_of_complete_run_is_a_no_op(self, done):
        run_dir, result = done
        before = (run_dir / "state.json").read_text()
        again = resume(run_dir)
        assert again.best_source == result.best_source
        assert (run_dir / "state.json").read_text() == before


class TestEvaluateFinal:
    def test_needs_four_races(self, done):
        _, result = done
        policy = QPolicy.load(result.final_policy_path)
        with pytest.raises(ValueError, match="four"):
            evaluate_final(policy, tiny_config().env, 3)

    def test_keeps_middle_half(self, done):
        _, result = done
        policy = QPolicy.load(result.final_policy_path)
        report = evaluate_final(policy, tiny_config().env, 8, seed=5)
        assert report.races == 8
        assert report.retained == 4 == len(report.places)
        assert report.places == sorted(report.places)
        twin = evaluate_final(policy, tiny_config().env, 8, seed=5)
        assert twin == report


class FixedClient:
    """LLM stub returning one canned line regardless of prompt."""

    def __init__(self, text="## Agent Summary\ncanned"):
        self.text = text

    def complete(self, messages):
        return self.text

    def __call__(self, messages):
        return self.text


class TestFeedbackRouting:
    def test_self_uses_llm_summary(self, tmp_path):
        from rewardforge.generation import mock_llm

        cfg = tiny_config(feedback_source="self")
        best = {"iteration": 1, "overview": "o", "program": "p", "summary": "s", "ref": "r"}
        text = collect_feedback(cfg, tmp_path, 1, best, client=mock_llm(seed=3))
        assert text.startswith("## Agent Summary")

    def test_file_consumes_watched_file(self, tmp_path):
        watched = tmp_path / "notes.txt"
        watched.write_text("brake earlier into turn one\n")
        cfg = tiny_config(feedback_source="file", feedback_path=str(watched), feedback_timeout=5.0)
        best = {"iteration": 1, "overview": "", "program": "", "summary": "", "ref": ""}
        assert collect_feedback(cfg, tmp_path, 1, best) == "brake earlier into turn one"
        assert not watched.exists()

    def test_file_timeout_warns_and_continues(self, tmp_path, monkeypatch):
        monkeypatch.setattr(run_module, "FEEDBACK_POLL_SECONDS", 0.01)
        cfg = tiny_config(
            feedback_source="file", feedback_path=str(tmp_path / "never.txt"), feedback_timeout=0.05
        )
        best = {"iteration": 1, "overview": "", "program": "", "summary": "", "ref": ""}
        with pytest.warns(UserWarning, match="no feedback"):
            assert collect_feedback(cfg, tmp_path, 1, best) == ""

    def test_cli_reads_stdin(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr("builtins.input", lambda prompt="": "  tighten the racing line  ")
        cfg = tiny_config(feedback_source="cli")
        best = {"iteration": 1, "overview": "", "program": "", "summary": "went ok", "ref": "abc"}
        assert collect_feedback(cfg, tmp_path, 1, best) == "tighten the racing line"
        assert "went ok" in capsys.readouterr().out

    def test_cli_eof_means_no_feedback(self, tmp_path, monkeypatch):
        def no_tty(prompt=""):
            raise EOFError

        monkeypatch.setattr("builtins.input", no_tty)
        cfg = tiny_config(feedback_source="cli")
        best = {"iteration": 1, "overview": "", "program": "", "summary": "", "ref": ""}
        assert collect_feedback(cfg, tmp_path, 1, best) == ""

    def test_http_parks_request_and_waits(self, tmp_path, monkeypatch):
        monkeypatch.setattr(run_module, "FEEDBACK_POLL_SECONDS", 0.02)
        cfg = tiny_config(feedback_source="http", feedback_timeout=10.0)
        it_dir = iteration_dir(tmp_path, 1)
        it_dir.mkdir(parents=True)
        best = {"iteration": 1, "overview": "", "program": "", "summary": "p2 finish", "ref": "xyz"}
        out = {}

        def worker():
            out["text"] = collect_feedback(cfg, tmp_path, 1, best)

        t = threading.Thread(target=worker)
        t.start()
        request = it_dir / "feedback_request.json"
        deadline = time.monotonic() + 5
        while not request.exists() and time.monotonic() < deadline:
            time.sleep(0.01)
        doc = json.loads(request.read_text())
        assert doc["status"] == "pending"
        assert doc["summary"] == "p2 finish"
        (it_dir / "feedback.txt").write_text("push harder on straights")
        t.join(timeout=5)
        assert out["text"] == "push harder on straights"
        assert json.loads(request.read_text())["status"] == "answered"


class TestApi:
    @pytest.fixture()
    def client(self, done):
        run_dir, _ = done
        return TestClient(create_app(run_dir))

    def test_rejects_non_run_dir(self, tmp_path):
        with pytest.raises(ValueError):
            create_app(tmp_path)

    def test_run_overview(self, client):
        doc = client.get("/api/v1/run").json()
        assert doc["goal"] == "finish first without crashing"
        assert doc["status"] == "complete"

    def test_iteration_views(self, client):
        views = client.get("/api/v1/iterations").json()
        assert [v["iteration"] for v in views] == [1, 2]
        view = client.get("/api/v1/iterations/1").json()
        assert len(view["programs"]) == 4
        assert sum(p["selected"] for p in view["programs"]) == 2
        assert all("sigma" in p for p in view["programs"])
        assert len(view["agents"]) == 2
        assert view["ranking"]["best_slot"] in (0, 1)
        assert client.get("/api/v1/iterations/9").status_code == 404

    def test_diagnostics(self, client):
        doc = client.get("/api/v1/iterations/1/diagnostics/0").json()
        assert doc["checkpoints"]
        assert client.get("/api/v1/iterations/1/diagnostics/7").status_code == 404

    def test_course_geometry(self, client):
        doc = client.get("/api/v1/course").json()
        assert doc["name"] == "oval"
        assert doc["half_width"] == 6.0
        assert doc["total_length"] == pytest.approx(400.0)
        line = doc["centerline"]
        assert len(line) == 256
        assert all(len(p) == 2 for p in line)
        # evenly sampled loop: the last point sits one step short of the first
        gap = ((line[0][0] - line[-1][0]) ** 2 + (line[0][1] - line[-1][1]) ** 2) ** 0.5
        assert gap == pytest.approx(doc["total_length"] / 256, rel=0.2)

    def test_generation_transcripts(self, client):
        docs = client.get("/api/v1/iterations/1/transcripts").json()
        assert len(docs) == 4  # one exchange log per candidate
        first = docs[0][0]
        assert set(first) == {"stage", "messages", "response"}
        assert first["stage"] == "overview"
        assert docs[0][1]["stage"] == "code"
        assert client.get("/api/v1/iterations/9/transcripts").status_code == 404

    def test_trajectory_endpoints(self, done, client):
        run_dir, _ = done
        ref = RunState.load_or_create(run_dir).phase_meta(1, "train_0")["ref"]
        summary = client.get(f"/api/v1/trajectories/{ref}").json()
        assert summary["rows"] > 0
        assert summary["duration"] == pytest.approx(20.0, abs=1.0)
        frames = client.get(f"/api/v1/trajectories/{ref}/frames").json()
        assert frames["fps"] == FRAME_HZ
        assert len(frames["frames"]) > 10
        assert client.get("/api/v1/trajectories/feedbeef").status_code == 404
        assert client.get("/api/v1/trajectories/feedbeef/frames").status_code == 404

    def test_no_pending_feedback_on_complete_run(self, client):
        assert client.get("/api/v1/feedback/pending").json() == {"pending": None}
        resp = client.post("/api/v1/feedback", json={"iteration": 1, "text": "hi"})
        assert resp.status_code == 404

    def test_label_round_trip(self, done, client):
        run_dir, _ = done
        tasks = client.get("/api/v1/labels/tasks", params={"labeler": "carol"}).json()
        assert len(tasks) == 2  # one pair per iteration
        blob = json.dumps(tasks)
        assert "weights:" not in blob  # labeling stays blind to the programs
        task = tasks[0]
        assert set(task) == {"id", "iteration", "first", "second"}

        body = {"first": task["first"], "second": task["second"], "verdict": 1, "labeler": "carol"}
        rec = client.post("/api/v1/labels", json=body).json()
        assert rec["judge_id"] == "human:carol"
        assert rec["p"] == 0
        assert rec["iteration"] == task["iteration"]
        lines = (run_dir / "preferences.jsonl").read_text().splitlines()
        assert any('"human:carol"' in line for line in lines)

        # same pair, same labeler: rejected even with sides swapped
        swapped = {"first": task["second"], "second": task["first"], "verdict": 2, "labeler": "carol"}
        assert client.post("/api/v1/labels", json=body).status_code == 409
        assert client.post("/api/v1/labels", json=swapped).status_code == 409
        remaining = client.get("/api/v1/labels/tasks", params={"labeler": "carol"}).json()
        assert len(remaining) == 1

        # a second labeler is independent
        dave = {**body, "labeler": "dave", "verdict": 2}
        rec2 = client.post("/api/v1/labels", json=dave).json()
        assert rec2["judge_id"] == "human:dave"
        assert rec2["p"] == 1

    def test_label_validation(self, client):
        tasks = client.get("/api/v1/labels/tasks", params={"labeler": "erin"}).json()
        task = tasks[-1]
        bad_ref = {"first": "feedbeef", "second": task["second"], "verdict": 1, "labeler": "erin"}
        assert client.post("/api/v1/labels", json=bad_ref).status_code == 404
        tie = {"first": task["first"], "second": task["second"], "verdict": 0, "labeler": "erin"}
        assert client.post("/api/v1/labels", json=tie).status_code == 400
        tie["verdict"] = 3
        assert client.post("/api/v1/labels", json=tie).status_code == 400


class TestHttpFeedbackRun:
    def test_console_post_unblocks_run(self, tmp_path, monkeypatch):
        monkeypatch.setattr(run_module, "FEEDBACK_POLL_SECONDS", 0.02)
        run_dir = tmp_path / "run"
        cfg = tiny_config(iterations=1, feedback_source="http", feedback_timeout=60.0)
        out = {}

        def worker():
            out["result"] = run(cfg, run_dir)

        t = threading.Thread(target=worker)
        t.start()
        try:
            deadline = time.monotonic() + 120
            while not (run_dir / "state.json").exists() and time.monotonic() < deadline:
                time.sleep(0.05)
            client = TestClient(create_app(run_dir))
            pending = None
            while pending is None and time.monotonic() < deadline:
                pending = client.get("/api/v1/feedback/pending").json()["pending"]
                if pending is None:
                    time.sleep(0.05)
            assert pending is not None and pending["iteration"] == 1

            resp = client.post(
                "/api/v1/feedback", json={"iteration": 1, "text": "hold the inside line"}
            )
            assert resp.status_code == 200
        finally:
            t.join(timeout=120)
        assert "result" in out
        assert (iteration_dir(run_dir, 1) / "feedback.txt").read_text() == "hold the inside line"
        # answered: no longer pending, and a second post is rejected
        client = TestClient(create_app(run_dir))
        assert client.get("/api/v1/feedback/pending").json()["pending"] is None
        assert (
            client.post("/api/v1/feedback", json={"iteration": 1, "text": "again"}).status_code
            == 404
        )


class TestLabelHelpers:
    def test_submit_label_direct(self, done):
        run_dir, _ = done
        tasks = label_tasks(run_dir, "frank")
        task = tasks[0]
        rec = submit_label(run_dir, task["first"], task["second"], 2, "frank")
        assert rec.judge_id == "human:frank"
        assert rec.p == 1
        with pytest.raises(FileExistsError):
            submit_label(run_dir, task["first"], task["second"], 1, "frank")
        with pytest.raises(ValueError):
            submit_label(run_dir, task["first"], task["second"], 0, "grace")
        with pytest.raises(KeyError):
            submit_label(run_dir, "feedbeef", task["second"], 1, "grace")

    def test_presentation_order_is_stable(self, done):
        run_dir, _ = done
        a = label_tasks(run_dir, "heidi")
        b = label_tasks(run_dir, "heidi")
        assert [(t["first"], t["second"]) for t in a] == [(t["first"], t["second"]) for t in b]

    def test_post_feedback_without_pending(self, done):
        run_dir, _ = done
        with pytest.raises(LookupError):
            post_feedback(run_dir, 1, "late thoughts")


class TestAblateBuffer:
    def test_comparable_arms(self, tmp_path):
        program = parse("pace = cur.speed\nweights: pace = 1.0\n")
        env = EnvConfig(episode=EpisodeConfig(n_opponents=3, time_limit=10.0))
        settings = TrainSettings(updates_per_epoch=50, warmup=100)
        summary = ablate_buffer(program, env, 2, 3, tmp_path / "study", settings=settings)

        for name in (
            "donor.diagnostics.json",
            "with_secondary.diagnostics.json",
            "without_secondary.diagnostics.json",
            "summary.json",
        ):
            assert (tmp_path / "study" / name).is_file()
        with_arm, without_arm = summary["with_secondary"], summary["without_secondary"]
        assert with_arm["epochs"] == without_arm["epochs"] == [1, 2]
        assert len(with_arm["returns"]) == len(without_arm["returns"]) == 2
        assert summary["budget"] == 2


class TestCli:
    def test_goal_required(self, tmp_path):
        ns = _build_parser().parse_args(["run", "--out", str(tmp_path)])
        with pytest.raises(SystemExit, match="goal"):
            _config_from_args(ns)

    def test_flags_override_config_file(self, tmp_path):
        doc = {"goal": "from file", "seed": 5, "env": {"course": {"layout": "s_curve"}}}
        cfg_file = tmp_path / "base.json"
        cfg_file.write_text(json.dumps(doc))
        ns = _build_parser().parse_args(
            ["run", "--out", str(tmp_path / "r"), "--config", str(cfg_file), "--seed", "9",
             "--opponents", "5", "--updates-per-epoch", "25"]
        )
        cfg = _config_from_args(ns)
        assert cfg.goal == "from file"
        assert cfg.seed == 9
        assert cfg.env.course.layout == "s_curve"  # partial env section survives the merge
        assert cfg.env.episode.n_opponents == 5
        assert cfg.env.episode.time_limit == 60.0
        assert cfg.settings.updates_per_epoch == 25

    def test_eval_command(self, done, capsys):
        from rewardforge.orchestrator.cli import main

        run_dir, _ = done
        assert main(["eval", str(run_dir), "--races", "4", "--seed", "2"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["races"] == 4 and doc["retained"] == 2

    def test_label_command(self, done, monkeypatch, capsys):
        from rewardforge.orchestrator.cli import main

        run_dir, _ = done
        answers = iter(["2", "q"])
        monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
        assert main(["label", str(run_dir), "--labeler", "ivan"]) == 0
        out = capsys.readouterr().out
        assert "recorded 1 label(s)" in out
        assert "weights:" not in out  # terminal labeling is blind too
        assert any(
            r.judge_id == "human:ivan" for r in PreferenceStore(run_dir).records()
        )
