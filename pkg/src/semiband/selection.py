"""Top-m selection and rank utilities.

Every routine breaks ties toward the lower index so results are
deterministic for a given score vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Action:
    """An m-subset of [d], stored as sorted indices."""

    indices: tuple
    d: int

    @property
    def m(self) -> int:
        return len(self.indices)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.d, dtype=bool)
        out[list(self.indices)] = True
        return out

    def __contains__(self, i) -> bool:
        return i in self.indices


def _check_scores(score, m):
    score = np.asarray(score, dtype=float)
    if score.ndim != 1:
        raise ValueError("score vector must be one-dimensional")
    d = score.size
    if not (1 <= m <= d):
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    if not np.all(np.isfinite(score)):
        raise ValueError("score vector must be finite")
    return score, d


def top_m_indices(score, m: int) -> np.ndarray:
    """Indices of the m largest scores, lowest index first among ties, sorted ascending."""
    score, d = _check_scores(score, m)
    # a stable sort of -score keeps equal scores in index order
    order = np.argsort(-score, kind="stable")
    return np.sort(order[:m])


def select_top_m(score, m: int) -> Action:
    idx = top_m_indices(score, m)
    return Action(tuple(int(i) for i in idx), int(np.asarray(score).size))


def ascending_ranks(values) -> np.ndarray:
    """1-based ranks in ascending order; equal values rank by index.

    sigma_i = #{j : v_j < v_i} + #{j <= i : v_j = v_i}.
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(1, v.size + 1)
    return ranks


def theta_th_largest_in_prefix(values, eligible, theta: int) -> int:
    """Index of the theta-th largest entry among ``eligible`` indices.

    ``eligible`` is either a boolean mask or an index array.
    """
    values = np.asarray(values, dtype=float)
    eligible = np.asarray(eligible)
    if eligible.dtype == bool:
        idx = np.flatnonzero(eligible)
    else:
        idx = np.sort(eligible.astype(np.int64))
    if not (1 <= theta <= idx.size):
        raise ValueError(f"theta={theta} out of range for {idx.size} eligible entries")
    order = np.argsort(-values[idx], kind="stable")
    return int(idx[order[theta - 1]])


def prefix_of_rank(ranks, sigma_i: int) -> np.ndarray:
    """Indices j with sigma_j <= sigma_i."""
    return np.flatnonzero(np.asarray(ranks) <= sigma_i)
