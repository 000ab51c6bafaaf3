"""HTTP service over a run directory: artifact reads, feedback, labels.

The service never regenerates artifacts; it reads whatever the run loop
has durably recorded, accepts feedback for the pending task, and appends
manual preference labels through the store's single-writer lock.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import artifacts

API_PREFIX = "/api/v1"


class FeedbackPost(BaseModel):
    iteration: int
    text: str = ""


class LabelPost(BaseModel):
    first: str
    second: str
    verdict: int  # 1 = first shown preferred, 2 = second
    labeler: str = ""


def create_app(run_dir: Path, static_dir: Path | None = None) -> FastAPI:
    run_dir = Path(run_dir)
    if not artifacts.is_run_dir(run_dir):
        raise ValueError(f"{run_dir} is not a run directory")
    app = FastAPI(title="rewardforge run service")
    write_lock = threading.Lock()  # serializes feedback/label posts

    @app.get(f"{API_PREFIX}/run")
    def get_run() -> dict:
        return artifacts.run_overview(run_dir)

    @app.get(f"{API_PREFIX}/course")
    def get_course() -> dict:
        return artifacts.course_geometry(run_dir)

    @app.get(f"{API_PREFIX}/iterations")
    def get_iterations() -> list[dict]:
        return artifacts.iteration_views(run_dir)

    @app.get(f"{API_PREFIX}/iterations/{{k}}")
    def get_iteration(k: int) -> dict:
        view = artifacts.iteration_view(run_dir, k)
        if view is None:
            raise HTTPException(404, f"iteration {k} has no artifacts yet")
        return view

    @app.get(f"{API_PREFIX}/iterations/{{k}}/diagnostics/{{slot}}")
    def get_diagnostics(k: int, slot: int) -> dict:
        doc = artifacts.diagnostics_doc(run_dir, k, slot)
        if doc is None:
            raise HTTPException(404, f"no diagnostics for iteration {k} agent {slot}")
        return doc

    @app.get(f"{API_PREFIX}/iterations/{{k}}/transcripts")
    def get_transcripts(k: int) -> list:
        doc = artifacts.iteration_transcripts(run_dir, k)
        if doc is None:
            raise HTTPException(404, f"no transcripts for iteration {k}")
        return doc

    @app.get(f"{API_PREFIX}/trajectories/{{ref}}")
    def get_trajectory(ref: str) -> dict:
        doc = artifacts.trajectory_summary(run_dir, ref)
        if doc is None:
            raise HTTPException(404, f"unknown trajectory {ref}")
        return doc

    @app.get(f"{API_PREFIX}/trajectories/{{ref}}/frames")
    def get_frames(ref: str) -> dict:
        doc = artifacts.trajectory_frames(run_dir, ref)
        if doc is None:
            raise HTTPException(404, f"no frames recorded for {ref}")
        return doc

    @app.get(f"{API_PREFIX}/feedback/pending")
    def get_pending_feedback() -> dict:
        return {"pending": artifacts.pending_feedback(run_dir)}

    @app.post(f"{API_PREFIX}/feedback")
    def post_feedback(body: FeedbackPost) -> dict:
        with write_lock:
            try:
                artifacts.post_feedback(run_dir, body.iteration, body.text)
            except LookupError as exc:
                raise HTTPException(404, str(exc)) from exc
            except FileExistsError as exc:
                raise HTTPException(409, str(exc)) from exc
        return {"ok": True, "iteration": body.iteration}

    @app.get(f"{API_PREFIX}/labels/tasks")
    def get_label_tasks(labeler: str = "") -> list[dict]:
        return artifacts.label_tasks(run_dir, labeler)

    @app.post(f"{API_PREFIX}/labels")
    def post_label(body: LabelPost) -> dict:
        with write_lock:
            try:
                record = artifacts.submit_label(
                    run_dir, body.first, body.second, body.verdict, body.labeler
                )
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from exc
            except KeyError as exc:
                raise HTTPException(404, str(exc.args[0])) from exc
            except FileExistsError as exc:
                raise HTTPException(409, str(exc)) from exc
        return record.to_json()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
