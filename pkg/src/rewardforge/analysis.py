"""Post-hoc analyses: reward correlation, weight tuning, and how well
trajectory-alignment scores predict post-training preferences.

All operations are pure over immutable inputs; randomness is explicit
via seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alignment import step_totals
from .dsl import RewardProgram, evaluate_batch, parse
from .env.course import make_course
from .env.sim import EpisodeConfig, rollout
from .schema import OBS_FIELD_NAMES

TUNE_MAX_ITERATIONS = 5000
TUNE_TOLERANCE = 1e-10
DEFAULT_STRIDE = 10
DEFAULT_START_RANK = 10


# ------------------------------------------------------------- trajectories


@dataclass
class TrajectorySet:
    """Trajectories spanning training stages (and hence skill levels)."""

    trajectories: list
    provenance: list[dict] = field(default_factory=list)  # epoch/start_rank/seed

    def __post_init__(self):
        if not self.trajectories:
            raise ValueError("trajectory set must not be empty")
        if self.provenance and len(self.provenance) != len(self.trajectories):
            raise ValueError("provenance must match trajectories one-to-one")


def sample_diverse_trajectories(
    checkpoint_policies: list,
    env_config,
    stride: int = DEFAULT_STRIDE,
    start_rank: int = DEFAULT_START_RANK,
    seed: int = 0,
) -> TrajectorySet:
    """One mid-field, one-lap race per stride-th checkpoint policy.

    Taking policies across training stages yields trajectories at varying
    skill, which is what makes correlation/tuning fits meaningful.
    """
    from .trainer import greedy_policy_fn

    if not checkpoint_policies:
        raise ValueError("no checkpointed policies to sample from")
    picks = checkpoint_policies[::stride]
    course = make_course(env_config.course)
    episode = EpisodeConfig(
        dt=env_config.episode.dt,
        laps=1,
        time_limit=env_config.episode.time_limit,
        n_opponents=env_config.episode.n_opponents,
        start_rank=start_rank,
        opponent_speed_lo=env_config.episode.opponent_speed_lo,
        opponent_speed_hi=env_config.episode.opponent_speed_hi,
    )
    rng = np.random.default_rng(seed)
    trajectories, provenance = [], []
    for epoch, policy in picks:
        race_seed = int(rng.integers(2**31 - 1))
        traj = rollout(greedy_policy_fn(policy, course), course, episode, race_seed)
        traj.metadata["checkpoint_epoch"] = epoch
        traj.metadata["start_rank"] = start_rank
        trajectories.append(traj)
        provenance.append({"epoch": epoch, "start_rank": start_rank, "seed": race_seed})
    return TrajectorySet(trajectories, provenance)


# -------------------------------------------------------------- correlation


def _totals_across(program: RewardProgram, tset: TrajectorySet) -> np.ndarray:
    return np.concatenate([step_totals(t, program) for t in tset.trajectories])


def reward_correlation(
    program: RewardProgram, reference_program: RewardProgram, tset: TrajectorySet
) -> float | None:
    """Pearson r between per-step weighted totals; None when either series
    is constant (correlation undefined rather than NaN)."""
    a = _totals_across(program, tset)
    b = _totals_across(reference_program, tset)
    return _pearson(a, b)


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    a = a - a.mean()
    b = b - b.mean()
    na, nb = float(np.sqrt(a @ a)), float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        return None
    return float((a @ b) / (na * nb))


@dataclass(frozen=True)
class CorrelationEntry:
    index: int
    original_r: float | None
    tuned_r: float | None

    def to_json(self) -> dict:
        return {"index": self.index, "original_r": self.original_r, "tuned_r": self.tuned_r}


@dataclass
class CorrelationReport:
    entries: list[CorrelationEntry]

    def to_json(self) -> dict:
        return {"entries": [e.to_json() for e in self.entries]}


def correlation_report(
    programs: list[RewardProgram],
    reference_program: RewardProgram,
    tset: TrajectorySet,
    tune: bool = True,
) -> CorrelationReport:
    entries = []
    for k, program in enumerate(programs):
        original = reward_correlation(program, reference_program, tset)
        tuned = None
        if tune:
            result = tune_weights(program, reference_program, tset)
            tuned = result.r_tuned
        entries.append(CorrelationEntry(index=k, original_r=original, tuned_r=tuned))
    return CorrelationReport(entries)


# ------------------------------------------------------------ weight tuning


@dataclass
class TuneResult:
    program: RewardProgram
    r_initial: float | None
    r_tuned: float | None
    scale: float  # stage-2 multiplier applied to all weights
    iterations: int
    degenerate: bool  # input returned unchanged (constant series)


def _component_matrix(program: RewardProgram, tset: TrajectorySet) -> np.ndarray:
    """(total steps, n_components) unweighted component values."""
    blocks = []
    for traj in tset.trajectories:
        fields = traj.metadata["course_fields"]
        prev_rows = np.vstack([traj.obs[:1], traj.obs[:-1]])
        cur = {n: traj.obs[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
        prev = {n: prev_rows[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
        batch = evaluate_batch(program, cur, prev, fields)
        blocks.append(
            np.column_stack([batch.per_component[n] for n in program.component_names])
        )
    return np.vstack(blocks)


def _r_of(w: np.ndarray, xc: np.ndarray, yc: np.ndarray, ynorm: float) -> float | None:
    t = xc @ w
    tn = float(np.sqrt(t @ t))
    if tn == 0.0:
        return None
    return float((t @ yc) / (tn * ynorm))


def tune_weights(
    program: RewardProgram, reference_program: RewardProgram, tset: TrajectorySet
) -> TuneResult:
    """Two-stage fit against a reference reward.

    Stage 1 runs full-batch gradient ascent with backtracking on the
    Pearson correlation between the weighted total and the reference
    total (correlation is differentiable in the weights; component
    values are precomputed once). Stage 2 rescales all weights by the
    closed-form least-squares scalar c* = <ref, total>/<total, total>,
    which minimizes mean squared error without touching the correlation.
    """
    names = program.component_names
    x = _component_matrix(program, tset)
    y = _totals_across(reference_program, tset)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    ynorm = float(np.sqrt(yc @ yc))
    w0 = np.array([program.weights[n] for n in names], dtype=np.float64)
    r_init = _r_of(w0, xc, yc, ynorm) if ynorm > 0 else None

    live_columns = np.abs(xc).max(axis=0) > 0
    if ynorm == 0.0 or not live_columns.any():
        return TuneResult(program, r_init, r_init, 1.0, 0, True)

    # starting point must give a non-constant total; fall back from the
    # program's own weights to uniform to a single live component
    basis = np.zeros_like(w0)
    basis[int(np.argmax(live_columns))] = 1.0
    w, r = None, None
    for start in (w0, np.ones_like(w0), basis):
        r_start = _r_of(start, xc, yc, ynorm)
        if r_start is not None:
            w, r = start.copy(), r_start
            break
    assert w is not None  # the basis vector always qualifies

    iterations = 0
    step = 1.0
    if len(names) >= 2:  # with one component r is scale-invariant: nothing to ascend
        for iterations in range(1, TUNE_MAX_ITERATIONS + 1):
            t = xc @ w
            tn = float(np.sqrt(t @ t))
            grad = (xc.T @ yc) / (tn * ynorm) - (t @ yc) / (tn**3 * ynorm) * (xc.T @ t)
            if not float(np.sqrt(grad @ grad)) > 0.0:
                break
            improved = False
            while step > 1e-18:
                cand = w + step * grad
                r_cand = _r_of(cand, xc, yc, ynorm)
                if r_cand is not None and r_cand > r:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            # rescale to bound magnitudes; r is invariant under positive scaling
            w = cand / max(float(np.abs(cand).max()), 1e-12)
            r_prev, r = r, r_cand
            step *= 2.0
            if abs(r - r_prev) < TUNE_TOLERANCE:
                break

    total = x @ w
    denom = float(total @ total)
    scale = float((y @ total) / denom) if denom > 0 else 1.0
    if scale <= 0:
        # an MSE-optimal negative scale would flip every reward's sign and
        # with it the correlation stage 1 just maximized — keep the scale
        scale = 1.0
    w_final = w * scale
    tuned = program.with_weights({n: float(v) for n, v in zip(names, w_final)})
    r_tuned = _r_of(w_final, xc, yc, ynorm)
    return TuneResult(tuned, r_init, r_tuned, scale, iterations, False)


# --------------------------------------------------- TAC predictive accuracy


def tac_accuracy(store, x: int, trials: int = 20, seed: int = 0) -> float:
    """How well alignment scores fitted on x sampled preferences predict
    the full store's labels.

    Per trial: draw x records without replacement, score every generating
    program by its alignment σ on the draw (same formula as tac()), then
    predict each full-store label by "higher-σ program's trajectory
    wins". σ ties score 0.5. Returns the mean accuracy over trials.

    Trajectories must carry `program_source` metadata naming their
    generating reward program.
    """
    records = store.records()
    n = len(records)
    if x < 0 or x > n:
        raise ValueError(f"x must be within [0, {n}]")
    if trials < 1:
        raise ValueError("need at least one trial")

    # resolve each trajectory to its generating program (by source text)
    sources: list[str] = []
    source_index: dict[str, int] = {}
    prog_of_ref: dict[str, int] = {}
    for rec in records:
        for ref in (rec.traj_i, rec.traj_j):
            if ref in prog_of_ref:
                continue
            meta = store.trajectory(ref).metadata
            src = meta.get("program_source")
            if not src:
                raise ValueError(f"trajectory {ref} lacks program provenance")
            if src not in source_index:
                source_index[src] = len(sources)
                sources.append(src)
            prog_of_ref[ref] = source_index[src]

    # average reward of every (program, trajectory) pair, computed once
    programs = [parse(src) for src in sources]
    refs = list(prog_of_ref)
    g = np.empty((len(programs), len(refs)))
    ref_slot = {ref: k for k, ref in enumerate(refs)}
    for pi, prog in enumerate(programs):
        for ref in refs:
            g[pi, ref_slot[ref]] = float(
                step_totals(store.trajectory(ref), prog).mean()
            )

    pair_slots = np.array(
        [(ref_slot[r.traj_i], ref_slot[r.traj_j]) for r in records]
    )
    labels = np.array([r.p for r in records])
    winner_prog = np.array(
        [prog_of_ref[r.traj_i if r.p == 0 else r.traj_j] for r in records]
    )
    loser_prog = np.array(
        [prog_of_ref[r.traj_j if r.p == 0 else r.traj_i] for r in records]
    )

    def sigma_on(subset: np.ndarray) -> np.ndarray:
        """σ per program over the record subset — (2P − |D|)/|D|."""
        if len(subset) == 0:
            return np.zeros(len(programs))
        gi = g[:, pair_slots[subset, 0]]
        gj = g[:, pair_slots[subset, 1]]
        induced = np.where(gi > gj, 0, 1)
        agree = np.where(gi == gj, 0.5, (induced == labels[subset]).astype(float))
        p_sum = agree.sum(axis=1)
        return (2.0 * p_sum - len(subset)) / len(subset)

    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(trials):
        subset = rng.choice(n, size=x, replace=False) if x else np.array([], dtype=int)
        sigma = sigma_on(subset)
        sw, sl = sigma[winner_prog], sigma[loser_prog]
        score = np.where(sw > sl, 1.0, np.where(sw == sl, 0.5, 0.0))
        accs.append(float(score.mean()))
    return float(np.mean(accs))


def accuracy_curve(store, xs: list[int], trials: int = 20, seed: int = 0):
    """[(x, mean Acc)] — the dataset-size sweep behind the accuracy plot."""
    return [(x, tac_accuracy(store, x, trials, seed)) for x in xs]


# ----------------------------------------------------------------- plotting


def plot_correlations(report: CorrelationReport, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    idx = [e.index for e in report.entries]
    orig = [e.original_r if e.original_r is not None else 0.0 for e in report.entries]
    fig, ax = plt.subplots(figsize=(6, 3))
    width = 0.4
    ax.bar([i - width / 2 for i in idx], orig, width, label="original")
    if any(e.tuned_r is not None for e in report.entries):
        tuned = [e.tuned_r if e.tuned_r is not None else 0.0 for e in report.entries]
        ax.bar([i + width / 2 for i in idx], tuned, width, label="tuned")
    ax.set_xlabel("program")
    ax.set_ylabel("Pearson r vs reference")
    ax.set_ylim(-1.05, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_accuracy_curve(points, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(xs, ys, marker="o")
    ax.axhline(0.5, linestyle="--", linewidth=1)
    ax.set_xlabel("preferences sampled")
    ax.set_ylabel("prediction accuracy")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
