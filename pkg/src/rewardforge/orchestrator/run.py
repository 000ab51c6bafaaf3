"""The design loop: generate rewards, filter by alignment, train, rank,
collect feedback, repeat; then train and evaluate the final policy.

Every phase persists its artifacts before the loop moves on, so a killed
run resumes exactly where it stopped (see state.RunState).
"""

from __future__ import annotations

import dataclasses
import json
import select
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..alignment import PreferenceRecord, PreferenceStore, tac, utc_now
from ..dsl import RewardProgram, parse
from ..env.course import make_course
from ..env.metrics import metrics
from ..env.render import FRAME_HZ
from ..env.sim import rollout
from ..generation import (
    HttpLLMClient,
    default_context,
    generate_rewards,
    mock_llm,
    self_feedback,
)
from ..judge import (
    Modality,
    bradley_terry,
    llm_judge_pipeline,
    noisy_oracle_judge,
    oracle_judge,
    pairwise_judge,
)
from ..trainer import (
    Diagnostics,
    QPolicy,
    ReplayBuffer,
    TrainSettings,
    diagnostics_to_text,
    greedy_policy_fn,
    train,
)
from .config import RunConfig
from .state import (
    CONFIG_FILE,
    FEEDBACK_REQUEST_FILE,
    FEEDBACK_TEXT_FILE,
    FINAL_DIR,
    FRAMES_DIR,
    RunState,
    iteration_dir,
    seed_for,
)

GENERATION_RETRIES = 5
FEEDBACK_POLL_SECONDS = 0.5
NO_FEEDBACK_PLACEHOLDER = "(no feedback provided)"


@dataclass
class RunResult:
    run_dir: Path
    best_source: str
    best_program: RewardProgram
    final_policy_path: Path
    evaluation: "EvalReport"


# ------------------------------------------------------------ phase running


def _phase(state: RunState, iteration: int, name: str, fn):
    """Execute fn once; completed phases verify their artifacts and skip."""
    rec = state.lookup(iteration, name)
    if rec is not None:
        state.verify(rec)
        return rec.meta
    artifacts, meta = fn()
    state.complete(iteration, name, artifacts, meta)
    return meta


def _default_client(config: RunConfig):
    if config.llm_url:
        return HttpLLMClient(config.llm_url, model=config.llm_model or "default")
    return mock_llm(seed=config.seed)


def _make_judge(config: RunConfig, seed: int, client=None):
    spec = config.judge
    if spec == "oracle":
        return oracle_judge(thresholds=config.env.thresholds)
    if spec.startswith("noisy-oracle:"):
        flip = float(spec.split(":", 1)[1])
        return noisy_oracle_judge(flip, seed, thresholds=config.env.thresholds)
    modality = Modality(spec.split(":", 1)[1]) if ":" in spec else Modality.BOTH
    judge_client = HttpLLMClient(config.llm_url, model=config.llm_model or "default") if config.llm_url else client
    if judge_client is None:
        raise ValueError("llm judging needs llm_url or an injected client")
    return llm_judge_pipeline(judge_client, modality)


# -------------------------------------------------------------- feedback


def collect_feedback(
    config: RunConfig,
    run_dir: Path,
    iteration: int,
    best: dict,
    client=None,
    transcripts: list | None = None,
) -> str:
    """Route one round of optional human (or self-) feedback.

    cli prompts on stdin, file watches config.feedback_path, http parks a
    pending task for the API/console, self asks the LLM for a summary.
    Timeouts fall back to empty feedback with a warning.
    """
    source = config.feedback_source
    timeout = config.resolved_feedback_timeout
    if source == "self":
        descriptions = [best["overview"], best["program"], best["summary"]]
        return self_feedback(client, descriptions, transcripts=transcripts)
    if source == "cli":
        return _cli_feedback(best, timeout)
    if source == "file":
        return _wait_for_file(Path(config.feedback_path), timeout, require_content=True, consume=True)
    if source == "http":
        return _http_feedback(run_dir, iteration, best, timeout)
    raise ValueError(f"unknown feedback source {source!r}")


def _cli_feedback(best: dict, timeout: float) -> str:
    print(f"Iteration {best['iteration']} best agent: {best['summary']}")
    print(f"Trajectory {best['ref']}")
    if timeout > 0:
        print("feedback> ", end="", flush=True)
        ready, _, _ = select.select([sys.stdin], [], [], timeout)
        if not ready:
            warnings.warn("feedback prompt timed out; continuing without it")
            return ""
        return sys.stdin.readline().strip()
    try:
        return input("feedback> ").strip()
    except EOFError:
        return ""


def _wait_for_file(path: Path, timeout: float, require_content: bool, consume: bool) -> str:
    deadline = time.monotonic() + timeout if timeout > 0 else None
    while True:
        if path.exists():
            text = path.read_text().strip()
            if text or not require_content:
                if consume:
                    path.unlink()
                return text
        if deadline is not None and time.monotonic() >= deadline:
            warnings.warn(f"no feedback appeared at {path}; continuing without it")
            return ""
        wait = FEEDBACK_POLL_SECONDS
        if deadline is not None:
            wait = min(wait, max(0.02, deadline - time.monotonic()))
        time.sleep(wait)


def _http_feedback(run_dir: Path, iteration: int, best: dict, timeout: float) -> str:
    it_dir = iteration_dir(run_dir, iteration)
    request = it_dir / FEEDBACK_REQUEST_FILE
    answer = it_dir / FEEDBACK_TEXT_FILE
    if not request.exists():
        request.write_text(
            json.dumps(
                {
                    "iteration": iteration,
                    "status": "pending",
                    "best_ref": best["ref"],
                    "summary": best["summary"],
                    "created_at": utc_now(),
                },
                indent=2,
            )
        )
    text = _wait_for_file(answer, timeout, require_content=False, consume=False)
    doc = json.loads(request.read_text())
    doc["status"] = "answered" if answer.exists() else "expired"
    request.write_text(json.dumps(doc, indent=2))
    return text


# ------------------------------------------------------- final evaluation


@dataclass
class EvalReport:
    """Placement statistics over the middle half of seeded races."""

    races: int
    retained: int
    mean_place: float
    std_place: float
    mean_dist_to_first: float
    std_dist_to_first: float
    disqualified: int  # across all races, before the middle-half cut
    places: list[int]  # retained, ascending

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_json(doc: dict) -> "EvalReport":
        return EvalReport(**{**doc, "places": [int(p) for p in doc["places"]]})


def evaluate_final(policy: QPolicy, env_cfg, races: int, seed: int = 0) -> EvalReport:
    """Race the policy from last place `races` times; keep the middle 50%
    by final place (disqualification applied first) and report placement
    and distance-to-first statistics over the kept races."""
    if races < 4:
        raise ValueError("final evaluation needs at least four races")
    course = make_course(env_cfg.course)
    controller = greedy_policy_fn(policy, course)
    episode = dataclasses.replace(env_cfg.episode, start_rank=None)
    places, dists, dq_count = [], [], 0
    for r in range(races):
        traj = rollout(controller, course, episode, seed_for(seed, 0, "eval-race", r))
        result, dq = metrics(traj, env_cfg.thresholds)
        places.append(result.final_place)
        dists.append(result.dist_to_first)
        dq_count += int(dq)
    order = sorted(range(races), key=lambda i: (places[i], i))
    keep = order[races // 4 : races // 4 + races // 2]
    kept_places = [places[i] for i in keep]
    kept_dists = [dists[i] for i in keep]
    return EvalReport(
        races=races,
        retained=len(keep),
        mean_place=float(np.mean(kept_places)),
        std_place=float(np.std(kept_places)),
        mean_dist_to_first=float(np.mean(kept_dists)),
        std_dist_to_first=float(np.std(kept_dists)),
        disqualified=dq_count,
        places=sorted(kept_places),
    )


# ------------------------------------------------------------- the loop


def run(config: RunConfig, run_dir: Path, client=None, judge_factory=None) -> RunResult:
    """Execute (or continue) a full design run in run_dir."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = run_dir / CONFIG_FILE
    if cfg_path.exists():
        if RunConfig.load(cfg_path) != config:
            raise ValueError("run directory holds a different config; use resume()")
    else:
        config.save(cfg_path)
    (run_dir / FRAMES_DIR).mkdir(exist_ok=True)

    state = RunState.load_or_create(run_dir)
    if state.status != "complete":
        state.set_status("running")
    store = PreferenceStore(run_dir)
    client = client if client is not None else _default_client(config)
    judge_factory = judge_factory or _make_judge
    master = config.seed
    course = make_course(config.env.course)

    history: tuple[str, ...] = ()
    best_source = diag_text = feedback_text = ""

    for k in range(1, config.iterations + 1):
        it_dir = iteration_dir(run_dir, k)
        for sub in ("rewards", "trajectories", "policies", "transcripts"):
            (it_dir / sub).mkdir(parents=True, exist_ok=True)

        if k == 1:
            ctx = default_context(config.goal)
        else:
            ctx = default_context(
                config.goal,
                iteration=k,
                history=history,
                best_program=best_source,
                diagnostics=diag_text,
                feedback=feedback_text,
            )

        def do_generate():
            results = generate_rewards(
                client,
                ctx,
                m=config.programs_per_iteration,
                max_retries=GENERATION_RETRIES,
                seed=seed_for(master, k, "generate"),
            )
            paths = []
            for i, res in enumerate(results):
                p = it_dir / "rewards" / f"candidate_{i:02d}.txt"
                p.write_text(res.text)
                paths.append(p)
            tpath = it_dir / "transcripts" / "generation.json"
            tpath.write_text(json.dumps([r.transcripts for r in results], indent=1))
            paths.append(tpath)
            meta = {
                "programs": [r.text for r in results],
                "overviews": [r.overview for r in results],
                "repairs": [r.repair_attempts for r in results],
            }
            return paths, meta

        gmeta = _phase(state, k, "generate", do_generate)
        programs: list[str] = gmeta["programs"]
        overviews: list[str] = gmeta["overviews"]

        def do_filter():
            sigma = [tac(parse(text), store) for text in programs]
            order = sorted(range(len(programs)), key=lambda i: (-sigma[i], i))
            selected = order[: config.train_top]
            path = it_dir / "rewards" / "selection.json"
            path.write_text(json.dumps({"sigma": sigma, "selected": selected}, indent=2) + "\n")
            return [path], {"sigma": sigma, "selected": selected}

        fmeta = _phase(state, k, "filter", do_filter)
        selected: list[int] = fmeta["selected"]

        secondary_rel = None
        if k >= 2:
            prev_best = state.phase_meta(k - 1, "rank")["best_slot"]
            secondary_rel = f"iter_{k - 1}/policies/agent_{prev_best}.buffer"

        for j, candidate in enumerate(selected):

            def do_train(j=j, candidate=candidate):
                program = parse(programs[candidate])
                secondary = (
                    ReplayBuffer.load(run_dir / secondary_rel) if secondary_rel else None
                )
                result = train(
                    program,
                    config.env,
                    config.train_budget,
                    secondary=secondary,
                    seed=seed_for(master, k, "train", j),
                    settings=config.settings,
                )
                base = it_dir / "policies" / f"agent_{j}"
                result.policy.save(base)
                buf_path = it_dir / "policies" / f"agent_{j}.buffer"
                result.buffer.save(buf_path)
                diag_path = it_dir / "policies" / f"agent_{j}.diagnostics.json"
                result.diagnostics.save(diag_path)

                # race the trained agent; one shared seed per iteration keeps
                # the comparison fair (identical opponent fields)
                frames = []
                traj = rollout(
                    greedy_policy_fn(result.policy, course),
                    course,
                    config.env.episode,
                    seed_for(master, k, "race"),
                    metadata={
                        "iteration": k,
                        "candidate": candidate,
                        "program_source": programs[candidate],
                    },
                    frame_sink=frames.append,
                )
                ref = store.add_trajectory(traj)
                traj.save(it_dir / "trajectories")
                frames_path = run_dir / FRAMES_DIR / f"{ref}.json"
                frames_path.write_text(
                    json.dumps(
                        {"ref": ref, "fps": FRAME_HZ, "frames": [f.to_json() for f in frames]}
                    )
                )
                race, dq = metrics(traj, config.env.thresholds)
                artifacts = [
                    base.with_suffix(".npz"),
                    base.with_suffix(".json"),
                    buf_path,
                    diag_path,
                    it_dir / "trajectories" / f"{ref}.traj",
                    it_dir / "trajectories" / f"{ref}.json",
                    frames_path,
                ]
                meta = {
                    "slot": j,
                    "candidate": candidate,
                    "ref": ref,
                    "secondary": secondary_rel,
                    "final_place": race.final_place,
                    "disqualified": dq,
                    "laps": race.laps_completed,
                    "dist_to_first": race.dist_to_first,
                }
                return artifacts, meta

            _phase(state, k, f"train_{j}", do_train)

        def do_judge():
            slot_meta = [state.phase_meta(k, f"train_{j}") for j in range(len(selected))]
            refs = [m["ref"] for m in slot_meta]
            trajectories = [store.trajectory(r) for r in refs]
            judge = judge_factory(config, seed_for(master, k, "judge"), client)
            records = pairwise_judge(
                judge,
                trajectories,
                config.goal,
                iteration=k,
                seed=seed_for(master, k, "judge", 1),
            )
            added = 0
            for rec in records:
                # resumed judging must not double-append the same pair
                if store.labeled_by(rec.judge_id, rec.traj_i, rec.traj_j):
                    continue
                store.add(rec)
                added += 1
            paths = []
            transcript = getattr(judge, "transcript", None)
            if transcript:
                tp = it_dir / "transcripts" / "judge.json"
                tp.write_text(json.dumps(transcript, indent=1))
                paths.append(tp)
            meta = {"refs": refs, "added": added, "records": [r.to_json() for r in records]}
            return paths, meta

        jmeta = _phase(state, k, "judge", do_judge)

        def do_rank():
            refs = jmeta["refs"]
            records = [PreferenceRecord.from_json(d) for d in jmeta["records"]]
            ranking = bradley_terry(records, refs)
            best_slot = int(ranking.best_index)
            best_candidate = state.phase_meta(k, f"train_{best_slot}")["candidate"]
            doc = {
                "refs": refs,
                "strengths": ranking.strengths.tolist(),
                "wins": ranking.win_matrix.tolist(),
                "converged": ranking.converged,
                "best_slot": best_slot,
                "best_candidate": best_candidate,
            }
            path = it_dir / "ranking.json"
            path.write_text(json.dumps(doc, indent=2) + "\n")
            meta = {
                "best_slot": best_slot,
                "best_candidate": best_candidate,
                "strengths": ranking.strengths.tolist(),
            }
            return [path], meta

        rmeta = _phase(state, k, "rank", do_rank)
        best_slot = rmeta["best_slot"]
        best_candidate = rmeta["best_candidate"]
        tmeta = state.phase_meta(k, f"train_{best_slot}")

        def do_feedback():
            summary = (
                f"finished in place {tmeta['final_place']}"
                + (" (disqualified)" if tmeta["disqualified"] else "")
                + f" after {tmeta['laps']} lap(s)"
            )
            best = {
                "iteration": k,
                "overview": overviews[best_candidate],
                "program": programs[best_candidate],
                "summary": summary,
                "ref": tmeta["ref"],
            }
            transcripts: list = []
            text = collect_feedback(config, run_dir, k, best, client, transcripts)
            fpath = it_dir / FEEDBACK_TEXT_FILE
            fpath.write_text(text)
            paths = [fpath]
            if transcripts:
                tp = it_dir / "transcripts" / "feedback.json"
                tp.write_text(json.dumps(transcripts, indent=1))
                paths.append(tp)
            return paths, {"text": text, "source": config.feedback_source}

        fbmeta = _phase(state, k, "feedback", do_feedback)

        history = history + (overviews[best_candidate],)
        best_source = programs[best_candidate]
        diag = Diagnostics.load(it_dir / "policies" / f"agent_{best_slot}.diagnostics.json")
        diag_text = diagnostics_to_text(diag)
        feedback_text = fbmeta["text"].strip() or NO_FEEDBACK_PLACEHOLDER

    # ---- final policy: last best program, bigger budget, no secondary ----
    final_dir = run_dir / FINAL_DIR

    def do_final_train():
        program = parse(best_source)
        result = train(
            program,
            config.env,
            config.resolved_final_budget,
            secondary=None,
            seed=seed_for(master, 0, "final_train"),
            settings=config.settings,
        )
        final_dir.mkdir(exist_ok=True)
        base = final_dir / "policy"
        result.policy.save(base)
        diag_path = final_dir / "diagnostics.json"
        result.diagnostics.save(diag_path)
        ck_dir = final_dir / "checkpoints"
        ck_dir.mkdir(exist_ok=True)
        paths = [base.with_suffix(".npz"), base.with_suffix(".json"), diag_path]
        for epoch, snapshot in result.checkpoint_policies:
            p = ck_dir / f"epoch_{epoch:04d}"
            snapshot.save(p)
            paths += [p.with_suffix(".npz"), p.with_suffix(".json")]
        meta = {
            "source": best_source,
            "secondary": None,
            "budget": config.resolved_final_budget,
            "checkpoints": [epoch for epoch, _ in result.checkpoint_policies],
        }
        return paths, meta

    final_meta = _phase(state, 0, "final_train", do_final_train)

    def do_final_eval():
        policy = QPolicy.load(final_dir / "policy")
        report = evaluate_final(
            policy, config.env, config.eval_races, seed=seed_for(master, 0, "final_eval")
        )
        path = final_dir / "evaluation.json"
        path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
        return [path], report.to_json()

    eval_meta = _phase(state, 0, "final_eval", do_final_eval)
    state.set_status("complete")

    return RunResult(
        run_dir=run_dir,
        best_source=final_meta["source"],
        best_program=parse(final_meta["source"]),
        final_policy_path=final_dir / "policy",
        evaluation=EvalReport.from_json(eval_meta),
    )


def resume(run_dir: Path, client=None, judge_factory=None) -> RunResult:
    """Continue a killed or crashed run from its last durable phase."""
    run_dir = Path(run_dir)
    config = RunConfig.load(run_dir / CONFIG_FILE)
    return run(config, run_dir, client=client, judge_factory=judge_factory)


# --------------------------------------------------- secondary-buffer study


def ablate_buffer(
    program: RewardProgram,
    env_cfg,
    budget: int,
    seed: int,
    out_dir: Path,
    settings: TrainSettings = TrainSettings(),
) -> dict:
    """Train twice from one seed — with and without a donated secondary
    buffer — and write comparable diagnostics for both arms."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    donor = train(program, env_cfg, budget, seed=seed_for(seed, 0, "donor"), settings=settings)
    donor.diagnostics.save(out_dir / "donor.diagnostics.json")
    arm_seed = seed_for(seed, 0, "ablation")
    with_buf = train(
        program, env_cfg, budget, secondary=donor.buffer, seed=arm_seed, settings=settings
    )
    without_buf = train(program, env_cfg, budget, secondary=None, seed=arm_seed, settings=settings)
    with_buf.diagnostics.save(out_dir / "with_secondary.diagnostics.json")
    without_buf.diagnostics.save(out_dir / "without_secondary.diagnostics.json")

    def arm(result):
        checks = result.diagnostics.checkpoints
        return {
            "returns": [c.return_total for c in checks],
            "final_place": checks[-1].eval_metrics.final_place,
            "epochs": [c.epoch for c in checks],
        }

    summary = {
        "budget": budget,
        "seed": seed,
        "with_secondary": arm(with_buf),
        "without_secondary": arm(without_buf),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
