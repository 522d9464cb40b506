"""Geometric resampling (GR) and conditional geometric resampling (CGR).

Both estimate 1/w_i, the inverse probability that FTPL picks arm i, for every
arm in the chosen action. GR counts rounds until a fresh perturbation picks
the arm again. CGR does the same for low-ranked arms but on a swapped draw
that makes success m/sigma_i times more likely, then rescales the count by
C_i = sigma_i/m.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .perturbation import PerturbationSpec
from .selection import ascending_ranks, theta_th_largest_in_prefix

log = logging.getLogger(__name__)

DEFAULT_CAP = 10_000_000


@dataclass
class ResamplingBudget:
    """Hard cap on resampling iterations per estimator call."""

    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if int(self.cap) < 1:
            raise ValueError("resampling cap must be >= 1")
        self.cap = int(self.cap)


@dataclass
class EstimatorReport:
    """Per-call result of an inverse-probability estimator.

    ``estimates`` maps arm index to its estimate of 1/w_i. ``total_rounds`` is
    the resampling cost M_t: the longest count among plain-GR arms plus the
    sum of counts over the conditionally resampled arms. ``iterations`` is the
    number of passes of the outer loop.
    """

    estimates: dict
    counts: dict
    total_rounds: int
    iterations: int
    capped: bool
    kind: str
    scale: dict = field(default_factory=dict)


def _as_chosen(chosen, d):
    idx = np.asarray(sorted(int(i) for i in chosen), dtype=np.int64)
    if idx.size == 0 or idx[0] < 0 or idx[-1] >= d or np.unique(idx).size != idx.size:
        raise ValueError("chosen indices must be distinct arms in [0, d)")
    return idx


def _lam(cum_loss, eta):
    cum = np.asarray(cum_loss, dtype=float)
    if eta <= 0 or not np.isfinite(eta):
        raise ValueError("learning rate must be positive")
    if np.any(cum < 0) or not np.all(np.isfinite(cum)):
        raise ValueError("cumulative estimated losses must be finite and nonnegative")
    return eta * cum


def geometric_resample(cum_loss, eta: float, chosen, m: int, spec: PerturbationSpec,
                       rng: np.random.Generator, budget: ResamplingBudget | None = None,
                       lazy: bool = True) -> EstimatorReport:
    """GR estimate of 1/w_i for each chosen arm.

    With ``lazy`` the inner loop stops drawing coordinates once every active
    arm's membership is decided; the counts have the same law either way but
    the random stream is consumed differently.
    """
    budget = budget or ResamplingBudget()
    lam = _lam(cum_loss, eta)
    idx = _as_chosen(chosen, lam.size)
    inv = 1.0 / spec.alpha
    if lazy:
        order = np.argsort(lam, kind="stable").astype(np.int64)
        K, it, capped = _kernels.gr_lazy(rng, lam, idx, m, spec.code, inv, budget.cap, order)
    else:
        K, it, capped = _kernels.gr_literal(rng, lam, idx, m, spec.code, inv, budget.cap)
    if capped:
        log.warning("GR hit the resampling cap of %d iterations", budget.cap)
    counts = {int(i): int(k) for i, k in zip(idx, K)}
    return EstimatorReport(
        estimates={i: float(k) for i, k in counts.items()},
        counts=counts,
        total_rounds=int(K.max()),
        iterations=int(it),
        capped=bool(capped),
        kind="GR",
        scale={i: 1.0 for i in counts},
    )


def conditional_geometric_resample(cum_loss, eta: float, chosen, m: int,
                                   spec: PerturbationSpec, rng: np.random.Generator,
                                   budget: ResamplingBudget | None = None) -> EstimatorReport:
    """CGR estimate of 1/w_i for each chosen arm.

    Arms with ascending rank sigma_i <= m fall back to plain GR counts;
    the others are resampled on the swapped draw and scaled by sigma_i/m.
    """
    budget = budget or ResamplingBudget()
    cum = np.asarray(cum_loss, dtype=float)
    lam = _lam(cum, eta)
    idx = _as_chosen(chosen, lam.size)
    sigma = ascending_ranks(cum)
    arm_at_rank = np.argsort(sigma).astype(np.int64)
    K, it, capped = _kernels.cgr_literal(rng, lam, idx, sigma, arm_at_rank, m,
                                        spec.code, 1.0 / spec.alpha, budget.cap)
    if capped:
        log.warning("CGR hit the resampling cap of %d iterations", budget.cap)
    counts = {}
    scale = {}
    gr_max = 0
    u_sum = 0
    for i, k in zip(idx, K):
        i, k = int(i), int(k)
        counts[i] = k
        if sigma[i] > m:
            scale[i] = float(sigma[i] / m)
            u_sum += k
        else:
            scale[i] = 1.0
            gr_max = max(gr_max, k)
    return EstimatorReport(
        estimates={i: float(scale[i] * counts[i]) for i in counts},
        counts=counts,
        total_rounds=gr_max + u_sum,
        iterations=int(it),
        capped=bool(capped),
        kind="CGR",
        scale=scale,
    )


def swap_conditioned_draw(r_prime, i: int, sigma, theta: int, m: int):
    """Swap r'_i with the theta-th largest r' among arms ranked no worse than i.

    Returns the swapped copy and the partner index i'.
    """
    r = np.asarray(r_prime, dtype=float)
    sigma = np.asarray(sigma)
    if sigma[i] <= m:
        raise ValueError("swap is only defined for arms with sigma_i > m")
    if not (1 <= theta <= m):
        raise ValueError("theta must lie in [1, m]")
    partner = theta_th_largest_in_prefix(r, sigma <= sigma[i], theta)
    out = r.copy()
    out[i], out[partner] = r[partner], r[i]
    return out, partner


def batch_counts(kind: str, lam, chosen, m: int, spec: PerturbationSpec,
                 n_calls: int, rng: np.random.Generator, sigma=None, lazy: bool = True,
                 budget: ResamplingBudget | None = None):
    """Run ``n_calls`` independent estimator calls at fixed ``lam`` and action.

    Returns (counts, scale, total_rounds, capped) where ``counts`` has shape
    (n_calls, len(chosen)) and ``capped`` flags calls that hit the budget.
    ``sigma`` defaults to the ascending ranks of ``lam``.
    """
    budget = budget or ResamplingBudget()
    lam = np.asarray(lam, dtype=float)
    idx = _as_chosen(chosen, lam.size)
    inv = 1.0 / spec.alpha
    if kind == "GR":
        order = np.argsort(lam, kind="stable").astype(np.int64)
        K, capped = _kernels.gr_batch(rng, lam, idx, m, spec.code, inv, n_calls, order, lazy,
                                      budget.cap)
        scale = np.ones(idx.size)
        total = K.max(axis=1)
    elif kind == "CGR":
        sigma = ascending_ranks(lam) if sigma is None else np.asarray(sigma, dtype=np.int64)
        arm_at_rank = np.argsort(sigma).astype(np.int64)
        K, capped = _kernels.cgr_batch(rng, lam, idx, sigma, arm_at_rank, m, spec.code, inv,
                                       n_calls, budget.cap)
        u = sigma[idx] > m
        scale = np.where(u, sigma[idx] / m, 1.0)
        gr_part = K[:, ~u].max(axis=1) if (~u).any() else np.zeros(n_calls, np.int64)
        total = gr_part + K[:, u].sum(axis=1)
    else:
        raise ValueError(f"unknown estimator {kind!r}")
    return K, scale, total, capped


def resampling_cost(kind: str, lam, m: int, spec: PerturbationSpec, n_rounds: int,
                    rng: np.random.Generator, lazy: bool = True,
                    budget: ResamplingBudget | None = None):
    """Per-round cost M_t with the action itself drawn by FTPL at a fixed ``lam``.

    Returns (cost, capped), both of length ``n_rounds``.
    """
    budget = budget or ResamplingBudget()
    lam = np.asarray(lam, dtype=float)
    sigma = ascending_ranks(lam)
    arm_at_rank = np.argsort(sigma).astype(np.int64)
    if kind not in ("GR", "CGR"):
        raise ValueError(f"unknown estimator {kind!r}")
    return _kernels.cost_rounds(rng, lam, sigma, arm_at_rank, m, spec.code, 1.0 / spec.alpha,
                                n_rounds, kind == "CGR", lazy, budget.cap)
