"""Read-side views over a run directory, shared by the API and the CLI.

Everything here reads state.json/config.json fresh per call, so a service
watching a live run always reports the latest completed phase.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..alignment import PreferenceRecord, PreferenceStore, utc_now
from ..env.trajectory import Trajectory
from .config import RunConfig
from .state import (
    CONFIG_FILE,
    FEEDBACK_REQUEST_FILE,
    FEEDBACK_TEXT_FILE,
    FRAMES_DIR,
    STATE_FILE,
    RunState,
    iteration_dir,
    seed_for,
)


def is_run_dir(run_dir: Path) -> bool:
    run_dir = Path(run_dir)
    return (run_dir / CONFIG_FILE).exists() and (run_dir / STATE_FILE).exists()


def _require_run_dir(run_dir: Path) -> Path:
    run_dir = Path(run_dir)
    if not is_run_dir(run_dir):
        raise FileNotFoundError(f"{run_dir} is not a run directory")
    return run_dir


def load_config(run_dir: Path) -> RunConfig:
    return RunConfig.load(_require_run_dir(run_dir) / CONFIG_FILE)


def load_state(run_dir: Path) -> RunState:
    return RunState.load_or_create(_require_run_dir(run_dir))


def run_overview(run_dir: Path) -> dict:
    config = load_config(run_dir)
    state = load_state(run_dir)
    final_eval = state.lookup(0, "final_eval")
    return {
        "goal": config.goal,
        "status": state.status,
        "iterations_total": config.iterations,
        "iterations_completed": state.completed_iterations(),
        "final": {
            "trained": state.lookup(0, "final_train") is not None,
            "evaluation": final_eval.meta if final_eval else None,
        },
        "config": config.to_json(),
    }


def _feedback_status(run_dir: Path, k: int, state: RunState) -> dict:
    done = state.lookup(k, "feedback")
    if done is not None:
        return {"status": "answered", "text": done.meta.get("text", "")}
    request = iteration_dir(run_dir, k) / FEEDBACK_REQUEST_FILE
    answer = iteration_dir(run_dir, k) / FEEDBACK_TEXT_FILE
    if request.exists() and not answer.exists():
        doc = json.loads(request.read_text())
        if doc.get("status") == "pending":
            return {"status": "pending", "text": None, "summary": doc.get("summary", "")}
    return {"status": "none", "text": None}


def iteration_view(run_dir: Path, k: int) -> dict | None:
    run_dir = _require_run_dir(run_dir)
    state = load_state(run_dir)
    gen = state.lookup(k, "generate")
    if gen is None:
        return None
    filt = state.lookup(k, "filter")
    sigma = filt.meta["sigma"] if filt else []
    selected = filt.meta["selected"] if filt else []
    slot_of = {candidate: slot for slot, candidate in enumerate(selected)}
    agents = []
    for slot in range(len(selected)):
        rec = state.lookup(k, f"train_{slot}")
        if rec is not None:
            agents.append(rec.meta)
    rank = state.lookup(k, "rank")
    programs = [
        {
            "index": i,
            "source": source,
            "overview": gen.meta["overviews"][i],
            "repairs": gen.meta["repairs"][i],
            "sigma": sigma[i] if sigma else None,
            "selected": i in slot_of,
            "slot": slot_of.get(i),
        }
        for i, source in enumerate(gen.meta["programs"])
    ]
    return {
        "iteration": k,
        "phases": sorted(r.phase for r in state.records if r.iteration == k),
        "programs": programs,
        "agents": agents,
        "ranking": rank.meta if rank else None,
        "feedback": _feedback_status(run_dir, k, state),
    }


def iteration_views(run_dir: Path) -> list[dict]:
    state = load_state(run_dir)
    started = sorted({r.iteration for r in state.records if r.iteration > 0})
    return [view for k in started if (view := iteration_view(run_dir, k)) is not None]


def diagnostics_doc(run_dir: Path, k: int, slot: int) -> dict | None:
    path = iteration_dir(_require_run_dir(run_dir), k) / "policies" / f"agent_{slot}.diagnostics.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


def iteration_transcripts(run_dir: Path, k: int) -> list | None:
    """LLM exchanges behind iteration k's candidates (per sample, per stage)."""
    path = iteration_dir(_require_run_dir(run_dir), k) / "transcripts" / "generation.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


def course_geometry(run_dir: Path, samples: int = 256) -> dict:
    """The run's track as a closed centerline polyline, for client rendering."""
    from ..env import make_course

    course = make_course(load_config(run_dir).env.course)
    step = course.total_length / samples
    centerline = [
        [round(float(x), 3), round(float(y), 3)]
        for x, y in (course.point_at(i * step) for i in range(samples))
    ]
    return {
        "name": course.name,
        "total_length": course.total_length,
        "half_width": course.half_width,
        "centerline": centerline,
    }


def trajectory_summary(run_dir: Path, ref: str) -> dict | None:
    store = PreferenceStore(_require_run_dir(run_dir))
    if not store.has_trajectory(ref):
        return None
    traj = store.trajectory(ref)
    return {
        "ref": ref,
        "rows": int(traj.obs.shape[0]),
        "dt": traj.dt,
        "duration": float(traj.obs.shape[0] * traj.dt),
        "metadata": traj.metadata,
    }


def trajectory_frames(run_dir: Path, ref: str) -> dict | None:
    path = _require_run_dir(run_dir) / FRAMES_DIR / f"{ref}.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


# ------------------------------------------------------------- feedback


def pending_feedback(run_dir: Path) -> dict | None:
    run_dir = _require_run_dir(run_dir)
    config = load_config(run_dir)
    for k in range(1, config.iterations + 1):
        request = iteration_dir(run_dir, k) / FEEDBACK_REQUEST_FILE
        answer = iteration_dir(run_dir, k) / FEEDBACK_TEXT_FILE
        if not request.exists() or answer.exists():
            continue
        doc = json.loads(request.read_text())
        if doc.get("status") == "pending":
            return doc
    return None


def post_feedback(run_dir: Path, iteration: int, text: str) -> None:
    """Answer the pending feedback task; the waiting run loop picks it up.

    Raises LookupError when no task is pending for that iteration and
    FileExistsError when it was already answered.
    """
    run_dir = _require_run_dir(run_dir)
    request = iteration_dir(run_dir, iteration) / FEEDBACK_REQUEST_FILE
    answer = iteration_dir(run_dir, iteration) / FEEDBACK_TEXT_FILE
    if not request.exists() or json.loads(request.read_text()).get("status") != "pending":
        raise LookupError(f"iteration {iteration} has no pending feedback task")
    if answer.exists():
        raise FileExistsError(f"iteration {iteration} feedback was already submitted")
    tmp = answer.with_suffix(".txt.tmp")
    tmp.write_text(text)
    os.replace(tmp, answer)


# --------------------------------------------------------------- labeling


def _ref_iterations(state: RunState) -> dict[str, int]:
    out = {}
    for rec in state.records:
        if rec.phase.startswith("train_") and rec.iteration > 0:
            out[rec.meta["ref"]] = rec.iteration
    return out


def label_tasks(run_dir: Path, labeler: str = "") -> list[dict]:
    """Unlabeled trajectory pairs for this labeler, blind (refs only).

    One task per judged pair per iteration; presentation order is a
    deterministic coin flip so labelers never see a fixed "first = slot
    0" pattern.
    """
    run_dir = _require_run_dir(run_dir)
    config = load_config(run_dir)
    state = load_state(run_dir)
    store = PreferenceStore(run_dir)
    judge_id = f"human:{labeler}" if labeler else "human"
    tasks = []
    for k in sorted({r.iteration for r in state.records if r.iteration > 0}):
        slots = []
        for slot in range(config.train_top):
            rec = state.lookup(k, f"train_{slot}")
            if rec is not None:
                slots.append((slot, rec.meta["ref"]))
        pair_index = 0
        for a in range(len(slots)):
            for b in range(a + 1, len(slots)):
                slot_a, ref_a = slots[a]
                slot_b, ref_b = slots[b]
                swap = seed_for(config.seed, k, "label-order", pair_index) % 2 == 1
                pair_index += 1
                if store.labeled_by(judge_id, ref_a, ref_b):
                    continue
                first, second = (ref_b, ref_a) if swap else (ref_a, ref_b)
                tasks.append(
                    {
                        "id": f"{k}-{slot_a}-{slot_b}",
                        "iteration": k,
                        "first": first,
                        "second": second,
                    }
                )
    return tasks


def submit_label(
    run_dir: Path, first: str, second: str, verdict: int, labeler: str = ""
) -> PreferenceRecord:
    """Append one manual preference; verdict 1 = first shown preferred.

    Raises KeyError for unknown trajectory refs, ValueError for a bad
    verdict, FileExistsError when this labeler already labeled the pair.
    """
    run_dir = _require_run_dir(run_dir)
    if verdict not in (1, 2):
        raise ValueError("verdict must be 1 (first) or 2 (second)")
    store = PreferenceStore(run_dir)
    for ref in (first, second):
        if not store.has_trajectory(ref):
            raise KeyError(f"unknown trajectory {ref!r}")
    judge_id = f"human:{labeler}" if labeler else "human"
    if store.labeled_by(judge_id, first, second):
        raise FileExistsError(f"{judge_id} already labeled this pair")
    iteration = _ref_iterations(load_state(run_dir)).get(first, 0)
    record = PreferenceRecord(
        p=verdict - 1,
        traj_i=first,
        traj_j=second,
        judge_id=judge_id,
        iteration=iteration,
        created_at=utc_now(),
    )
    store.add(record)
    return record
