"""Bradley-Terry strength fitting over pairwise preference records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..alignment import PreferenceRecord

SMOOTHING = 0.1  # pseudo-count added to every off-diagonal win cell
MAX_ITERATIONS = 10_000
TOLERANCE = 1e-8  # max relative strength change at convergence


@dataclass(frozen=True)
class RankingResult:
    strengths: np.ndarray  # normalized so they sum to N
    best_index: int
    win_matrix: np.ndarray  # raw (unsmoothed) win counts
    converged: bool
    iterations: int


def win_matrix(records: list[PreferenceRecord], refs: list[str]) -> np.ndarray:
    """W[i, j] = times agent i was preferred over agent j."""
    index = {ref: k for k, ref in enumerate(refs)}
    w = np.zeros((len(refs), len(refs)))
    for rec in records:
        if rec.traj_i not in index or rec.traj_j not in index:
            raise ValueError(f"record references unknown trajectory {rec.traj_i!r}/{rec.traj_j!r}")
        i, j = index[rec.traj_i], index[rec.traj_j]
        if rec.p == 0:
            w[i, j] += 1
        else:
            w[j, i] += 1
    return w


def bradley_terry(records: list[PreferenceRecord], refs: list[str]) -> RankingResult:
    """Maximum-likelihood strengths via minorization-maximization.

    Every off-diagonal pair cell gets a +0.1 pseudo-count so undefeated
    (or winless) agents keep finite strengths.
    """
    n = len(refs)
    if n < 2:
        raise ValueError("ranking needs at least two agents")
    raw = win_matrix(records, refs)
    seen = (raw.sum(axis=0) + raw.sum(axis=1)) > 0
    if not seen.all():
        missing = [refs[k] for k in np.flatnonzero(~seen)]
        raise ValueError(f"agents never judged: {missing}")
    w = raw + SMOOTHING
    np.fill_diagonal(w, 0.0)
    wins = w.sum(axis=1)
    b = np.ones(n)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        pair_totals = w + w.T  # games played per pair (smoothed)
        denom = (pair_totals / (b[:, None] + b[None, :])).sum(axis=1)
        new_b = wins / denom
        new_b *= n / new_b.sum()
        change = np.max(np.abs(new_b - b) / b)
        b = new_b
        if change < TOLERANCE:
            converged = True
            break
    return RankingResult(
        strengths=b,
        best_index=int(np.argmax(b)),  # argmax takes the lowest index on ties
        win_matrix=raw,
        converged=converged,
        iterations=iterations,
    )


def select_best(ranking: RankingResult) -> int:
    return ranking.best_index
