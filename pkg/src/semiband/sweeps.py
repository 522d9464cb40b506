"""Randomized verification sweeps shared by the ``verify`` command and the test suite.

Every sweep returns a list of :class:`CheckRow`; a sweep passes when every
row has ``ok`` set.
"""
from __future__ import annotations

import math

import numpy as np

from .analytics import (
    CheckRow,
    LambdaProfile,
    QuadratureSettings,
    analyze_scan,
    check_lambda_star_bound,
    check_sigma_ratio_bound,
    counterexample_scan,
    mc_rank_frequencies,
    rank_integrals,
    selection_probabilities,
)
from .perturbation import (
    FRECHET,
    PARETO,
    PerturbationSpec,
    order_statistic_moments,
    pareto_order_statistic_mean,
    penalty_bound,
    top_m_sum_moments,
)
from .resampling import ResamplingBudget, batch_counts
from .selection import ascending_ranks

ALPHAS = (1.5, 2.0, 3.0)
FAMILIES = (FRECHET, PARETO)


def random_profile(rng: np.random.Generator, d_max: int = 8, m_max: int | None = None,
                   tie_prob: float = 0.2):
    """Random (d, m, lambda) with lambda drawn on one of three scales; sometimes with a tie."""
    d = int(rng.integers(1, d_max + 1))
    m = int(rng.integers(1, min(d, m_max or d) + 1))
    scale = float(rng.choice([0.2, 1.0, 4.0]))
    lam = scale * rng.random(d)
    if d > 1 and rng.random() < tie_prob:
        i, j = rng.choice(d, size=2, replace=False)
        lam[i] = lam[j]
    return d, m, lam


def lemma_instances(n: int, seed: int, d_max: int = 8):
    """(instance_id, spec, m, lam) tuples cycling through both families and ALPHAS."""
    rng = np.random.default_rng([seed, 3])
    out = []
    for k in range(n):
        d, m, lam = random_profile(rng, d_max)
        alpha = ALPHAS[k % len(ALPHAS)]
        for fam in FAMILIES:
            out.append((k, PerturbationSpec(fam, alpha), m, lam))
    return out


def sigma_ratio_sweep(n: int = 200, seed: int = 0, settings=None) -> list:
    rows = []
    for k, spec, m, lam in lemma_instances(n, seed):
        for r in check_sigma_ratio_bound(spec, lam, m, k, settings):
            r.check = f"sigma_ratio_{spec.family}_a{spec.alpha:g}"
            rows.append(r)
    return rows


def lambda_star_sweep(n: int = 100, seed: int = 0, settings=None) -> list:
    rows = []
    for k, spec, m, lam in lemma_instances(n, seed + 10_007):
        for r in check_lambda_star_bound(spec, lam, m, k, settings):
            r.check = f"lambda_star_{spec.family}_a{spec.alpha:g}"
            rows.append(r)
    return rows


def estimator_instances(n: int, seed: int, min_w: float = 0.02, settings=None):
    """(instance_id, d, m, lam) with every arm's selection probability at least ``min_w``
    under both families at alpha = 2; the floor keeps the resampling loops short."""
    rng = np.random.default_rng([seed, 7])
    out = []
    k = 0
    while len(out) < n:
        d = int(rng.integers(2, 9))
        m = int(rng.integers(1, min(4, d) + 1))
        lam = float(rng.uniform(0.0, 1.5)) * rng.random(d)
        ws = [selection_probabilities(PerturbationSpec(f, 2.0), lam, m, settings) for f in FAMILIES]
        if min(w.min() for w in ws) >= min_w:
            out.append((k, d, m, lam))
            k += 1
    return out


def arm_groups(d: int, m: int):
    """Actions that together contain every arm; the last is padded from the front."""
    groups = []
    for start in range(0, d, m):
        g = list(range(start, min(start + m, d)))
        pad = [j for j in range(d) if j not in g][: m - len(g)]
        groups.append(sorted(g + pad))
    return groups


def estimator_moments(kind, spec, lam, m, n_calls, rng, budget=None):
    """Per-arm raw moments of the estimate over ``n_calls`` calls with the arm chosen.

    Returns dict arm -> (mean, second moment, sample variance, se of variance, capped calls).
    """
    d = lam.size
    sigma = ascending_ranks(lam)
    res = {}
    for g in arm_groups(d, m):
        K, scale, _, capped = batch_counts(kind, lam, g, m, spec, n_calls, rng, sigma=sigma,
                                           budget=budget)
        for col, arm in enumerate(g):
            if arm in res:
                continue
            x = K[:, col] * float(scale[col])
            mean = x.mean()
            m2 = (x * x).mean()
            c = x - mean
            var = (c * c).sum() / (x.size - 1)
            m4 = (c**4).mean()
            se_var = math.sqrt(max(m4 - var * var, 0.0) / x.size)
            res[arm] = (mean, m2, var, se_var, int(capped.sum()))
    return res


def estimator_sweep(n: int = 20, n_calls: int = 1_000_000, seed: int = 0, cap: int | None = None,
                    families=FAMILIES, settings=None) -> list:
    """Unbiasedness (both estimators), GR second moment and the variance ordering."""
    budget = ResamplingBudget(cap) if cap else ResamplingBudget()
    rows = []
    for k, d, m, lam in estimator_instances(n, seed, settings=settings):
        sigma = ascending_ranks(lam)
        for fam in families:
            spec = PerturbationSpec(fam, 2.0)
            w = selection_probabilities(spec, lam, m, settings)
            rng = np.random.default_rng([seed, k, FAMILIES.index(fam)])
            mom = {kind: estimator_moments(kind, spec, lam, m, n_calls, rng, budget)
                   for kind in ("GR", "CGR")}
            for i in range(d):
                for kind in ("GR", "CGR"):
                    mean, m2, var, se_var, ncap = mom[kind][i]
                    if ncap:
                        rows.append(CheckRow(f"capped_{kind}_{fam}", k, i, float(ncap), 0.0,
                                             False, 0.0))
                    rel = abs(mean * w[i] - 1.0)
                    se = math.sqrt(var / n_calls) * w[i]
                    rows.append(CheckRow(f"unbiased_{kind}_{fam}", k, i, rel, 0.02,
                                         bool(rel <= 0.02 and not ncap), se))
                if w[i] >= 0.05:
                    mean, m2, var, se_var, ncap = mom["GR"][i]
                    target = 2.0 / w[i] ** 2 - 1.0 / w[i]
                    rel = abs(m2 / target - 1.0)
                    rows.append(CheckRow(f"second_moment_GR_{fam}", k, i, rel, 0.03,
                                         bool(rel <= 0.03 and not ncap), 0.0))
                if sigma[i] > m:
                    vg, sg = mom["GR"][i][2], mom["GR"][i][3]
                    vc, sc = mom["CGR"][i][2], mom["CGR"][i][3]
                    allow = 3.0 * math.sqrt(sg * sg + sc * sc)
                    rows.append(CheckRow(f"variance_order_{fam}", k, i, vc - vg, allow,
                                         bool(vc - vg <= allow), allow / 3.0))
    return rows


def penalty_sweep(seed: int = 0, trials: int = 400_000, os_trials: int = 2_000_000) -> list:
    """Top-m sum bound, the order-statistic mean formula and Frechet-vs-Pareto dominance."""
    rows = []
    rng = np.random.default_rng([seed, 11])
    k = 0
    for fam in FAMILIES:
        for a in ALPHAS:
            spec = PerturbationSpec(fam, a)
            for d in (2, 4, 8, 16):
                for m in sorted({1, d // 2, d}):
                    mean, se = top_m_sum_moments(spec, d, m, trials, rng)
                    bound = penalty_bound(spec, d, m)
                    rows.append(CheckRow(f"penalty_{fam}_a{a:g}_d{d}_m{m}", k, m, mean, bound,
                                         bool(mean <= bound), se))
                    k += 1
    for a in ALPHAS:
        for n in (1, 2, 3, 5, 8):
            pm, pse = order_statistic_moments(PerturbationSpec(PARETO, a), n, os_trials, rng)
            fm, fse = order_statistic_moments(PerturbationSpec(FRECHET, a), n, os_trials, rng)
            for kk in range(1, n + 1):
                # kk is the descending rank; skip order statistics whose variance diverges
                # faster than logarithmically, where a 1% Monte Carlo check is not meaningful
                if kk * a < 2.0:
                    continue
                exact = pareto_order_statistic_mean(a, n - kk + 1, n)
                rel = abs(pm[kk - 1] / exact - 1.0)
                rows.append(CheckRow(f"order_stat_mean_a{a:g}_n{n}", k, kk, rel, 0.01,
                                     bool(rel <= 0.01), pse[kk - 1] / exact))
                allow = 3.0 * math.hypot(pse[kk - 1], fse[kk - 1])
                rows.append(CheckRow(f"frechet_dominance_a{a:g}_n{n}", k, kk, fm[kk - 1],
                                     pm[kk - 1] + 1.0 + allow,
                                     bool(fm[kk - 1] <= pm[kk - 1] + 1.0 + allow), allow / 3.0))
            k += 1
    return rows


def counterexample_rows(settings=None) -> list:
    grid, vals, errs = counterexample_scan(settings=settings)
    info = analyze_scan(grid, vals, errs)
    noise = 10.0 * float(errs.max())
    after = grid > 0.5 + 1e-12
    rows = [
        CheckRow("strict_rise", 0, -1, info["max_rise"], noise, info["strict_rise"], info["max_err"]),
        CheckRow("strict_fall", 0, -1, info["max_fall"], noise, info["strict_fall"], info["max_err"]),
        CheckRow("exceeds_base", 0, -1, float(vals[after].max()), info["base_value"],
                 info["exceeds_base"], info["max_err"]),
        CheckRow("below_one_over_lambda_i", 0, -1, float(vals.max()), 2.0,
                 bool(vals.max() <= 2.0), info["max_err"]),
    ]
    return rows


def rank_frequency_sweep(n: int = 50, n_draws: int = 1_000_000, seed: int = 0,
                         settings=None) -> list:
    """Quadrature phi_{i,theta} against Monte Carlo frequencies for one (i, theta) per instance."""
    rng = np.random.default_rng([seed, 13])
    rows = []
    for k in range(n):
        d, m, lam = random_profile(rng, 8)
        spec = PerturbationSpec(FAMILIES[k % 2], ALPHAS[k % 3])
        prof = LambdaProfile(lam)
        i = int(rng.integers(0, d))
        theta = int(rng.integers(1, d + 1))
        ri = rank_integrals(spec, prof, i, theta, settings)
        phi = ri.phi[theta - 1]
        freq = mc_rank_frequencies(prof, spec, n_draws, rng)[i, theta - 1]
        # binomial noise plus the quadrature error, which matters when phi is 0 or 1
        sd = math.sqrt(max(phi * (1.0 - phi), 0.0) / n_draws + float(ri.err) ** 2)
        z = abs(freq - phi) / sd if sd > 0 else 0.0
        rows.append(CheckRow(f"rank_freq_{spec.family}_theta{theta}", k, i, float(freq),
                             float(phi), bool(z <= 3.0), float(sd)))
    return rows


SUITES = ("lemmas", "estimators", "counterexample", "penalty")


def run_suite(name: str, seed: int = 0, instances: int | None = None, cap: int | None = None,
              n_calls: int | None = None) -> list:
    settings = QuadratureSettings()
    if name == "lemmas":
        n = instances or 200
        return (sigma_ratio_sweep(n, seed, settings)
                + lambda_star_sweep(instances or 100, seed, settings))
    if name == "estimators":
        return estimator_sweep(instances or 4, n_calls or 100_000, seed, cap, settings=settings)
    if name == "counterexample":
        return counterexample_rows(settings)
    if name == "penalty":
        return penalty_sweep(seed)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
