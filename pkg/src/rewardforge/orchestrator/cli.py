"""Command line: run/resume the loop, serve the API, label, analyze."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from ..trainer import EnvConfig, QPolicy, TrainSettings
from .config import RunConfig
from .state import FINAL_DIR
from .run import ablate_buffer, evaluate_final, resume, run


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.handler(args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewardforge",
        description="Automated reward design: generate, align, train, rank, repeat.",
    )
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("run", help="start a design run")
    p.add_argument("--out", required=True, type=Path, help="run directory to create")
    p.add_argument("--config", type=Path, help="JSON config file; flags override it")
    p.add_argument("--goal", help="what the agent should achieve, in plain language")
    p.add_argument("--iterations", type=int, help="design rounds (K)")
    p.add_argument("--programs", type=int, help="candidates generated per round (M)")
    p.add_argument("--top", type=int, help="alignment-filtered candidates trained (N)")
    p.add_argument("--budget", type=int, help="training epochs per candidate")
    p.add_argument("--final-budget", type=int, help="epochs for the final policy")
    p.add_argument("--races", type=int, help="final evaluation race count")
    p.add_argument("--judge", help="oracle | noisy-oracle:<p> | llm[:<modality>]")
    p.add_argument("--feedback", help="cli | file | http | self")
    p.add_argument("--feedback-path", type=Path, help="file feedback: path to watch")
    p.add_argument("--feedback-timeout", type=float, help="seconds before giving up")
    p.add_argument("--seed", type=int)
    p.add_argument("--llm-url", help="chat endpoint; omit to use the built-in mock")
    p.add_argument("--llm-model")
    p.add_argument("--layout", help="course layout: oval | s_curve | maggiore_like")
    p.add_argument("--opponents", type=int, help="built-in AI car count")
    p.add_argument("--laps", type=int)
    p.add_argument("--time-limit", type=float, help="episode cap in seconds")
    p.add_argument("--updates-per-epoch", type=int)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("resume", help="continue a killed or crashed run")
    p.add_argument("run_dir", type=Path)
    p.set_defaults(handler=_cmd_resume)

    p = sub.add_parser("eval", help="re-run the final placement evaluation")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--policy", type=Path, help="policy base path (default: the run's final policy)")
    p.add_argument("--races", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("analyze", help="correlation/tuning and label-prediction sweeps")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path, help="output directory (default <run>/analysis)")
    p.add_argument("--reference", type=Path, help="reference reward program for correlation/tuning")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--stride", type=int, default=1, help="take every stride-th saved checkpoint")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("serve", help="serve the run over HTTP (console backend)")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", type=Path, help="built console assets to serve at /")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("label", help="label trajectory pairs from the terminal")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--labeler", default="", help="labeler id recorded as human:<id>")
    p.set_defaults(handler=_cmd_label)

    p = sub.add_parser("ablate-buffer", help="train with vs without a secondary buffer")
    p.add_argument("--program", required=True, type=Path, help="reward program file")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--budget", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--opponents", type=int)
    p.add_argument("--laps", type=int)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--layout")
    p.add_argument("--updates-per-epoch", type=int)
    p.set_defaults(handler=_cmd_ablate)

    return parser


def _config_from_args(args) -> RunConfig:
    doc = json.loads(args.config.read_text()) if args.config else {}
    env_doc = EnvConfig().to_json()
    for section, fields in doc.get("env", {}).items():
        env_doc.setdefault(section, {}).update(fields)
    doc["env"] = env_doc
    settings_doc = dataclasses.asdict(TrainSettings())
    settings_doc.update(doc.get("settings", {}))
    doc["settings"] = settings_doc
    direct = {
        "goal": args.goal,
        "iterations": args.iterations,
        "programs_per_iteration": args.programs,
        "train_top": args.top,
        "train_budget": args.budget,
        "final_budget": args.final_budget,
        "eval_races": args.races,
        "judge": args.judge,
        "feedback_source": args.feedback,
        "feedback_timeout": args.feedback_timeout,
        "seed": args.seed,
        "llm_url": args.llm_url,
        "llm_model": args.llm_model,
    }
    for key, value in direct.items():
        if value is not None:
            doc[key] = value
    if args.feedback_path is not None:
        doc["feedback_path"] = str(args.feedback_path)
    env_over = {
        ("course", "layout"): args.layout,
        ("episode", "n_opponents"): args.opponents,
        ("episode", "laps"): args.laps,
        ("episode", "time_limit"): args.time_limit,
    }
    for (section, field), value in env_over.items():
        if value is not None:
            doc["env"][section][field] = value
    if args.updates_per_epoch is not None:
        doc["settings"]["updates_per_epoch"] = args.updates_per_epoch
    if "goal" not in doc:
        raise SystemExit("a goal is required (--goal or config file)")
    return RunConfig.from_json(doc)


def _print_result(result) -> None:
    print("best reward program:")
    print(result.best_source)
    print(json.dumps(result.evaluation.to_json(), indent=2))


def _cmd_run(args) -> int:
    result = run(_config_from_args(args), args.out)
    _print_result(result)
    return 0


def _cmd_resume(args) -> int:
    result = resume(args.run_dir)
    _print_result(result)
    return 0


def _cmd_eval(args) -> int:
    from .artifacts import load_config

    config = load_config(args.run_dir)
    policy_base = args.policy or args.run_dir / FINAL_DIR / "policy"
    policy = QPolicy.load(policy_base)
    races = args.races or config.eval_races
    report = evaluate_final(policy, config.env, races, seed=args.seed)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def _cmd_analyze(args) -> int:
    from ..alignment import PreferenceStore
    from ..analysis import (
        accuracy_curve,
        correlation_report,
        plot_accuracy_curve,
        plot_correlations,
        sample_diverse_trajectories,
    )
    from ..dsl import parse
    from .artifacts import load_config, load_state

    run_dir = args.run_dir
    out_dir = args.out or run_dir / "analysis"
    out_dir.mkdir(parents=True, exist_ok=True)
    config = load_config(run_dir)
    state = load_state(run_dir)
    written = []

    store = PreferenceStore(run_dir)
    n = len(store.records())
    if n >= 2:
        xs = sorted({0, min(10, n), min(50, n), min(200, n), n})
        curve = accuracy_curve(store, xs, trials=args.trials)
        (out_dir / "accuracy.json").write_text(
            json.dumps({"points": [{"x": x, "accuracy": a} for x, a in curve]}, indent=2) + "\n"
        )
        plot_accuracy_curve(curve, out_dir / "accuracy.png")
        written += ["accuracy.json", "accuracy.png"]

    if args.reference is not None:
        reference = parse(args.reference.read_text())
        sources = [
            state.phase_meta(k, "generate")["programs"][state.phase_meta(k, "rank")["best_candidate"]]
            for k in state.completed_iterations()
        ]
        ck_dir = run_dir / FINAL_DIR / "checkpoints"
        checkpoints = sorted(ck_dir.glob("epoch_*.npz"))
        if not sources or not checkpoints:
            raise SystemExit("correlation analysis needs a completed run with a final policy")
        policies = [
            (int(p.stem.split("_")[1]), QPolicy.load(p.with_suffix(""))) for p in checkpoints
        ]
        tset = sample_diverse_trajectories(
            policies,
            config.env,
            stride=args.stride,
            start_rank=min(10, config.env.episode.n_opponents),
            seed=config.seed,
        )
        report = correlation_report([parse(s) for s in sources], reference, tset)
        (out_dir / "correlations.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
        plot_correlations(report, out_dir / "correlations.png")
        written += ["correlations.json", "correlations.png"]

    if not written:
        print("nothing to analyze: need preference records (and --reference for correlations)")
        return 1
    for name in written:
        print(out_dir / name)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    static = args.static
    if static is None:
        default = Path("frontend") / "dist"
        static = default if default.is_dir() else None
    app = create_app(args.run_dir, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_label(args) -> int:
    from .artifacts import label_tasks, submit_label, trajectory_summary

    tasks = label_tasks(args.run_dir, args.labeler)
    if not tasks:
        print("no unlabeled pairs for this labeler")
        return 0
    labeled = 0
    for task in tasks:
        print(f"\npair {task['id']} (iteration {task['iteration']})")
        for tag, ref in (("1", task["first"]), ("2", task["second"])):
            info = trajectory_summary(args.run_dir, ref)
            meta = info["metadata"]
            print(
                f"  [{tag}] {info['duration']:.1f}s, "
                f"{meta.get('laps_completed', 0)} lap(s), ref {ref[:12]}"
            )
        while True:
            answer = input("prefer [1/2, s(kip), q(uit)]? ").strip().lower()
            if answer in ("1", "2", "s", "q"):
                break
        if answer == "q":
            break
        if answer == "s":
            continue
        submit_label(args.run_dir, task["first"], task["second"], int(answer), args.labeler)
        labeled += 1
    print(f"recorded {labeled} label(s)")
    return 0


def _cmd_ablate(args) -> int:
    from ..dsl import parse
    from ..env.course import CourseSpec
    from ..env.sim import EpisodeConfig

    program = parse(args.program.read_text())
    env = EnvConfig()
    course = env.course if args.layout is None else CourseSpec(layout=args.layout)
    episode = EpisodeConfig(
        laps=args.laps if args.laps is not None else env.episode.laps,
        n_opponents=args.opponents if args.opponents is not None else env.episode.n_opponents,
        time_limit=args.time_limit if args.time_limit is not None else env.episode.time_limit,
    )
    env = EnvConfig(course=course, episode=episode, thresholds=env.thresholds)
    settings = TrainSettings()
    if args.updates_per_epoch is not None:
        settings = dataclasses.replace(settings, updates_per_epoch=args.updates_per_epoch)
    summary = ablate_buffer(program, env, args.budget, args.seed, args.out, settings)
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
