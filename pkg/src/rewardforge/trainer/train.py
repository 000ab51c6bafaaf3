"""Off-policy n-step Q-learning on a reward program.

One train() call turns a validated reward program into a greedy policy,
its evaluation trajectory, per-component diagnostics at checkpoints, and
the filled replay buffer (reusable as the next run's secondary buffer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dsl.ast import RewardProgram
from ..dsl.evaluator import evaluate_batch
from ..env import (
    Course,
    CourseSpec,
    EpisodeConfig,
    RaceMetrics,
    Thresholds,
    Trajectory,
    make_course,
    metrics,
    rollout,
)
from ..schema import OBS_FIELD_NAMES
from .features import features_batch, features_one, obs_dict_to_row
from .policy import N_ACTIONS, QPolicy, action_from_index
from .replay import DESK_CAPACITY, ReplayBuffer

_DEFAULT_THRESHOLDS = Path(__file__).resolve().parents[3] / "courses" / "thresholds.json"


def default_thresholds() -> Thresholds:
    if _DEFAULT_THRESHOLDS.exists():
        return Thresholds.load(_DEFAULT_THRESHOLDS)
    return Thresholds(max_collision_time=2.5, max_course_out_time=1.0)


@dataclass(frozen=True)
class EnvConfig:
    """Where training happens: course, episode shape, race thresholds."""

    course: CourseSpec = CourseSpec(layout="oval")
    episode: EpisodeConfig = EpisodeConfig(laps=1, n_opponents=3, time_limit=60.0)
    thresholds: Thresholds = field(default_factory=default_thresholds)

    def to_json(self) -> dict:
        return {
            "course": self.course.to_json(),
            "episode": self.episode.to_json(),
            "thresholds": self.thresholds.to_json(),
        }

    @staticmethod
    def from_json(doc: dict) -> "EnvConfig":
        return EnvConfig(
            course=CourseSpec.from_json(doc["course"]),
            episode=EpisodeConfig.from_json(doc["episode"]),
            thresholds=Thresholds.from_json(doc["thresholds"]),
        )


@dataclass(frozen=True)
class TrainSettings:
    """Learner knobs, desk-scale defaults."""

    updates_per_epoch: int = 500
    batch_size: int = 64
    lr: float = 1e-3
    discount: float = 0.9896
    n_step: int = 7
    target_blend: float = 0.005  # per-update Polyak coefficient
    secondary_ratio: float = 0.2
    capacity: int = DESK_CAPACITY
    warmup: int = 500  # transitions collected before updates begin
    hidden: int = 64
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6  # fraction of the budget spent decaying
    grad_clip: float = 10.0


@dataclass
class Checkpoint:
    epoch: int
    component_totals: dict[str, float]  # weighted episode totals, greedy eval
    return_total: float
    eval_metrics: RaceMetrics
    disqualified: bool

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "component_totals": self.component_totals,
            "return_total": self.return_total,
            "eval_metrics": {
                "final_place": self.eval_metrics.final_place,
                "car_collision_time": self.eval_metrics.car_collision_time,
                "course_out_time": self.eval_metrics.course_out_time,
                "laps_completed": self.eval_metrics.laps_completed,
                "dist_to_first": self.eval_metrics.dist_to_first,
            },
            "disqualified": self.disqualified,
        }

    @staticmethod
    def from_json(doc: dict) -> "Checkpoint":
        return Checkpoint(
            epoch=int(doc["epoch"]),
            component_totals={k: float(v) for k, v in doc["component_totals"].items()},
            return_total=float(doc["return_total"]),
            eval_metrics=RaceMetrics(**doc["eval_metrics"]),
            disqualified=bool(doc["disqualified"]),
        )


@dataclass
class Diagnostics:
    component_names: tuple[str, ...]
    checkpoints: list[Checkpoint]

    def to_json(self) -> dict:
        return {
            "component_names": list(self.component_names),
            "checkpoints": [c.to_json() for c in self.checkpoints],
        }

    @staticmethod
    def from_json(doc: dict) -> "Diagnostics":
        return Diagnostics(
            component_names=tuple(doc["component_names"]),
            checkpoints=[Checkpoint.from_json(c) for c in doc["checkpoints"]],
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @staticmethod
    def load(path: Path) -> "Diagnostics":
        return Diagnostics.from_json(json.loads(Path(path).read_text()))


@dataclass
class TrainResult:
    policy: QPolicy
    eval_trajectory: Trajectory
    diagnostics: Diagnostics
    buffer: ReplayBuffer
    # policy snapshots at every checkpoint epoch, for post-hoc analyses
    checkpoint_policies: list[tuple[int, QPolicy]] = field(default_factory=list)


class _Adam:
    def __init__(self, params: tuple[np.ndarray, ...], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: tuple[np.ndarray, ...], grads: list[np.ndarray]) -> None:
        self.t += 1
        lr_t = self.lr * np.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m += (1 - self.beta1) * (g - m)
            v += (1 - self.beta2) * (g * g - v)
            p -= lr_t * m / (np.sqrt(v) + self.eps)


def _clip_gradients(grads: list[np.ndarray], max_norm: float) -> None:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale


def greedy_policy_fn(policy: QPolicy, course: Course):
    """Rollout-ready controller that always takes the argmax action."""
    def fn(obs: dict):
        feat = features_one(obs_dict_to_row(obs), course)
        return action_from_index(int(policy.greedy_index(feat)[0]))

    return fn


def _episode_totals(
    program: RewardProgram, traj: Trajectory, course: Course
) -> dict[str, float]:
    """Weighted per-component totals over a trajectory.

    Per-step reward pairs each record with its predecessor (the first
    record pairs with itself, so difference-style terms start at zero).
    """
    prev_rows = np.vstack([traj.obs[:1], traj.obs[:-1]])
    cur = {n: traj.obs[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
    prev = {n: prev_rows[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
    result = evaluate_batch(program, cur, prev, course.fields())
    return {
        name: float(program.weights[name] * result.per_component[name].sum())
        for name in program.component_names
    }


def train(
    program: RewardProgram,
    env_cfg: EnvConfig,
    budget: int,
    secondary: ReplayBuffer | None = None,
    seed: int = 0,
    settings: TrainSettings = TrainSettings(),
) -> TrainResult:
    if budget < 1:
        raise ValueError("budget must be at least one epoch")
    course = make_course(env_cfg.course)
    episode_cfg = env_cfg.episode
    course_fields = course.fields()
    names = program.component_names
    weights_vec = np.array([program.weights[n] for n in names])

    ss = np.random.SeedSequence(seed)
    init_ss, collect_ss, eval_ss = ss.spawn(3)
    rng = np.random.default_rng(collect_ss)
    eval_rng = np.random.default_rng(eval_ss)

    policy = QPolicy.initial(int(init_ss.generate_state(1)[0]), settings.hidden, course.name)
    target = policy.copy()
    adam = _Adam(policy.parameters(), settings.lr)
    buffer = ReplayBuffer(settings.capacity, names)
    if secondary is not None and len(secondary):
        secondary = secondary.rescored(program, course_fields)
    else:
        secondary = None

    total_updates = budget * settings.updates_per_epoch
    decay_updates = max(1, int(total_updates * settings.eps_decay_frac))

    # --- collection state -------------------------------------------------
    from ..env.sim import reset, step  # late import to keep module load light

    state = reset(course, episode_cfg, int(rng.integers(2**31 - 1)))
    obs_row = obs_dict_to_row(state.observation(0))
    pending: list[tuple[np.ndarray, int, np.ndarray, bool]] = []

    def flush() -> None:
        if not pending:
            return
        obs_b = np.stack([p[0] for p in pending])
        act_b = np.array([p[1] for p in pending], dtype=np.int64)
        next_b = np.stack([p[2] for p in pending])
        done_b = np.array([p[3] for p in pending], dtype=bool)
        cur = {n: next_b[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
        prev = {n: obs_b[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
        result = evaluate_batch(program, cur, prev, course_fields)
        rew_b = np.stack([result.per_component[n] for n in names], axis=1)
        buffer.push_batch(obs_b, act_b, rew_b, next_b, done_b)
        pending.clear()

    def collect_one(update_index: int) -> None:
        nonlocal state, obs_row
        frac = min(1.0, update_index / decay_updates)
        eps = settings.eps_start + frac * (settings.eps_end - settings.eps_start)
        if rng.random() < eps:
            a = int(rng.integers(N_ACTIONS))
        else:
            feat = features_one(obs_row, course)
            a = int(policy.greedy_index(feat)[0])
        state, next_obs, done = step(state, action_from_index(a))
        next_row = obs_dict_to_row(next_obs)
        pending.append((obs_row, a, next_row, done))
        if done:
            state = reset(course, episode_cfg, int(rng.integers(2**31 - 1)))
            obs_row = obs_dict_to_row(state.observation(0))
            flush()
        else:
            obs_row = next_row
            if len(pending) >= 32:
                flush()

    def learn_step() -> float:
        b = settings.batch_size
        n_sec = int(rng.binomial(b, settings.secondary_ratio)) if secondary else 0
        parts = []
        if b - n_sec > 0:
            parts.append(buffer.sample_windows(
                rng, b - n_sec, settings.n_step, settings.discount, weights_vec))
        if n_sec > 0:
            parts.append(secondary.sample_windows(
                rng, n_sec, settings.n_step, settings.discount, weights_vec))
        batch = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
        with np.errstate(over="ignore"):  # non-finite loss is raised explicitly
            feats = features_batch(batch["obs"], course)
            boot_feats = features_batch(batch["bootstrap_obs"], course)
            boot_q = target.q_values(boot_feats).max(axis=1)
            y = batch["returns"] + batch["bootstrap_scale"] * boot_q

            h = np.tanh(feats @ policy.w1 + policy.b1)
            q = h @ policy.w2 + policy.b2
            rows = np.arange(len(y))
            qa = q[rows, batch["action"]]
            err = qa - y
            loss = float(np.mean(err**2))
            if not np.isfinite(loss):
                return loss
            dq = np.zeros_like(q)
            dq[rows, batch["action"]] = 2.0 * err / len(y)
            dh = (dq @ policy.w2.T) * (1 - h * h)
            grads = [feats.T @ dh, dh.sum(axis=0), h.T @ dq, dq.sum(axis=0)]
        _clip_gradients(grads, settings.grad_clip)
        adam.step(policy.parameters(), grads)
        target.blend_from(policy, settings.target_blend)
        return loss

    def checkpoint(epoch: int) -> tuple[Checkpoint, Trajectory]:
        eval_seed = int(eval_rng.integers(2**31 - 1))
        traj = rollout(greedy_policy_fn(policy, course), course, episode_cfg, eval_seed)
        totals = _episode_totals(program, traj, course)
        race, dq = metrics(traj, env_cfg.thresholds)
        cp = Checkpoint(
            epoch=epoch,
            component_totals=totals,
            return_total=float(sum(totals.values())),
            eval_metrics=race,
            disqualified=dq,
        )
        return cp, traj

    checkpoints: list[Checkpoint] = []
    snapshots: list[tuple[int, QPolicy]] = []
    every = max(1, budget // 10)
    update_index = 0
    eval_traj: Trajectory | None = None
    for _ in range(settings.warmup):
        collect_one(0)
    flush()
    for epoch in range(1, budget + 1):
        for _ in range(settings.updates_per_epoch):
            collect_one(update_index)
            if buffer.size >= min(settings.warmup, buffer.capacity):
                loss = learn_step()
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch} update {update_index}"
                    )
            update_index += 1
        if epoch % every == 0 or epoch == budget:
            cp, traj = checkpoint(epoch)
            checkpoints.append(cp)
            snapshots.append((epoch, policy.copy()))
            eval_traj = traj

    assert eval_traj is not None
    diagnostics = Diagnostics(component_names=names, checkpoints=checkpoints)
    return TrainResult(policy, eval_traj, diagnostics, buffer, snapshots)


def diagnostics_to_text(diagnostics: Diagnostics) -> str:
    """Render checkpoints as a fixed-width table for prompt embedding."""
    if not diagnostics.checkpoints:
        raise ValueError("diagnostics has no checkpoints")
    names = list(diagnostics.component_names)
    header = ["epoch", *names, "return", "place", "laps", "disqualified"]
    rows = [header]
    for cp in diagnostics.checkpoints:
        rows.append([
            str(cp.epoch),
            *(f"{cp.component_totals[n]:.3f}" for n in names),
            f"{cp.return_total:.3f}",
            str(cp.eval_metrics.final_place),
            str(cp.eval_metrics.laps_completed),
            "yes" if cp.disqualified else "no",
        ])
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)
