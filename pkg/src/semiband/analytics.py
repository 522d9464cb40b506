"""Quadrature for FTPL rank probabilities and the ratios that drive the stability analysis.

For a perturbation law with cdf F and density f, a profile lambda and a member
set B containing arm i,

    phi_{i,theta}(lambda; B) = P(arm i is the theta-th best of B under r - lambda)
                             = int f(x) PB_{theta-1}(p(x)) dx,
    J_{i,theta}(lambda; B)   = int f(x) / x * PB_{theta-1}(p(x)) dx,

with x = z + lambda_i the perturbation of arm i, p_j(x) = 1 - F(x + lambda_j - lambda_i)
the chance that j in B beats i, and PB_k the Poisson-binomial pmf. Substituting
u = F(x) maps every integral onto (0, 1) and absorbs the density.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import _kernels
from .perturbation import FRECHET, PerturbationSpec, cdf, inverse_cdf, survival
from .selection import ascending_ranks


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    limit: int = 2000
    sweep_slack: float = 1e-6


@dataclass
class LambdaProfile:
    """A scaled cumulative-loss vector restricted to a member set."""

    lam: np.ndarray
    members: np.ndarray = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam.ndim != 1 or not np.all(np.isfinite(self.lam)):
            raise ValueError("lambda must be a finite vector")
        if np.any(self.lam < 0):
            raise ValueError("lambda must be nonnegative")
        if self.members is None:
            self.members = np.arange(self.lam.size)
        self.members = np.unique(np.asarray(self.members, dtype=np.int64))
        if self.members.size == 0 or self.members[0] < 0 or self.members[-1] >= self.lam.size:
            raise ValueError("member set must be a nonempty subset of the arms")


@dataclass
class RankIntegrals:
    """phi and J for one arm and theta = 1..len(phi), with error estimates."""

    i: int
    phi: np.ndarray
    J: np.ndarray
    err: float
    members: np.ndarray = field(default=None, repr=False)


def poisson_binomial_pmf(p, kmax: int | None = None) -> np.ndarray:
    """P(N = k), k = 0..kmax, for N a sum of independent Bernoulli(p_j).

    p may have a trailing batch axis: shape (n,) or (n, b).
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    kmax = n if kmax is None else min(kmax, n)
    out = np.zeros((kmax + 1,) + p.shape[1:])
    out[0] = 1.0
    for j in range(n):
        pj = p[j]
        top = min(j + 1, kmax)
        out[1:top + 1] = out[1:top + 1] * (1.0 - pj) + out[0:top] * pj
        out[0] = out[0] * (1.0 - pj)
    return out


def _breakpoints(spec, lam, i, others):
    # p_j(x) has a kink where x + lam_j - lam_i crosses the support edge
    if spec.family == FRECHET:
        return []
    pts = []
    for j in others:
        edge = spec.nu + lam[i] - lam[j]
        if edge > spec.nu:
            u = cdf(spec, edge)
            if 0.0 < u < 1.0:
                pts.append(float(u))
    return sorted(set(pts))


def rank_integrals(spec: PerturbationSpec, profile: LambdaProfile, i: int,
                   theta_max: int | None = None,
                   settings: QuadratureSettings | None = None) -> RankIntegrals:
    """phi_{i,theta} and J_{i,theta} over the profile's member set for theta = 1..theta_max."""
    settings = settings or QuadratureSettings()
    lam = profile.lam
    members = profile.members
    if i not in set(members.tolist()):
        raise ValueError(f"arm {i} is not in the member set")
    others = members[members != i]
    nth = members.size if theta_max is None else int(theta_max)
    if not (1 <= nth <= members.size):
        raise ValueError("theta out of range")
    shift = lam[others] - lam[i]
    inv = 1.0 / spec.alpha

    def integrand(u):
        x = inverse_cdf(spec, u) if u > 0 else 0.0
        if spec.family == FRECHET:
            recip = (-math.log(u)) ** inv if u > 0 else 0.0
        else:
            recip = 1.0 / x
        p = survival(spec, x + shift)
        pb = poisson_binomial_pmf(p, nth - 1)
        return np.concatenate([pb, pb * recip])

    pts = _breakpoints(spec, lam, i, others)
    val, err = integrate.quad_vec(
        integrand, 0.0, 1.0,
        epsabs=settings.abs_tol, epsrel=settings.rel_tol, limit=settings.limit,
        points=pts or None,
    )
    return RankIntegrals(i=int(i), phi=val[:nth], J=val[nth:], err=float(err), members=members)


def phi_i_theta(spec, profile: LambdaProfile, i: int, theta: int, settings=None) -> float:
    return float(rank_integrals(spec, profile, i, theta, settings).phi[theta - 1])


def j_i_theta(spec, profile: LambdaProfile, i: int, theta: int, settings=None) -> float:
    return float(rank_integrals(spec, profile, i, theta, settings).J[theta - 1])


def phi_i(spec, profile: LambdaProfile, i: int, m: int, settings=None) -> float:
    """Probability that arm i ranks within the top min(m, |B|) of the member set."""
    mt = min(m, profile.members.size)
    return float(rank_integrals(spec, profile, i, mt, settings).phi.sum())


def j_i(spec, profile: LambdaProfile, i: int, m: int, settings=None) -> float:
    mt = min(m, profile.members.size)
    return float(rank_integrals(spec, profile, i, mt, settings).J.sum())


def selection_probabilities(spec, lam, m: int, settings=None) -> np.ndarray:
    """w_i = P(i in top-m of r - lam) for every arm, by quadrature."""
    prof = LambdaProfile(lam)
    return np.array([rank_integrals(spec, prof, i, m, settings).phi.sum()
                     for i in range(prof.lam.size)])


def mc_selection_prob(profile: LambdaProfile, spec: PerturbationSpec, m: int,
                      n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical frequency that each member ranks within the top min(m, |B|)."""
    freq = mc_rank_frequencies(profile, spec, n_draws, rng)
    return freq[:, :min(m, profile.members.size)].sum(axis=1)


def mc_rank_frequencies(profile: LambdaProfile, spec: PerturbationSpec,
                        n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """freq[p, theta-1]: how often members[p] ranked theta-th in B."""
    counts = _kernels.rank_frequencies(rng, profile.lam, profile.members, spec.code,
                                       1.0 / spec.alpha, int(n_draws))
    return counts / float(n_draws)


# closed-form constants


def sigma_ratio_bound(spec: PerturbationSpec, sigma: int, m: int) -> float:
    """Upper bound on J_i/phi_i in terms of the ascending rank sigma alone."""
    a = spec.alpha
    inv = 1.0 / a
    if spec.family == FRECHET:
        return ((min(sigma, m) + inv) / max(sigma - m + 1, 1)) ** inv
    return 2.0 * a / (a + 1.0) * ((min(sigma, m) + inv) / sigma) ** inv


def stability_constant(spec: PerturbationSpec, m: int, d: int) -> float:
    """Constant S with stability term <= eta * S (up to the sum over rounds)."""
    a = spec.alpha
    inv = 1.0 / a
    if spec.family == FRECHET:
        return 2.0 * (a + 1.0) * (m + inv) ** inv * (m + a / (a - 1.0) * (d - m + 1.0) ** (1.0 - inv))
    return 4.0 * a * a / (a - 1.0) * (m + inv) ** inv * d ** (1.0 - inv)


def pareto_equal_lambda_ratio(alpha: float, n: int, theta: int) -> float:
    """J/phi at an equal-lambda profile of n Pareto arms, arm ranked theta-th."""
    inv = 1.0 / alpha
    return float(np.exp(special.betaln(theta + inv, n + 1 - theta)
                        - special.betaln(theta, n + 1 - theta)))


def frechet_equal_lambda_bound(alpha: float, n: int, theta: int) -> float:
    """Gamma-form upper bound on the equal-lambda Frechet ratio."""
    inv = 1.0 / alpha
    return float(np.exp(special.gammaln(theta + inv) - special.gammaln(theta))
                 / (n + 1 - theta) ** inv)


def equal_lambda_ratio(spec: PerturbationSpec, n: int, theta: int, settings=None) -> float:
    """J_{i,theta}/phi_{i,theta} when all n members share the same lambda (shift invariant)."""
    if spec.family != FRECHET:
        return pareto_equal_lambda_ratio(spec.alpha, n, theta)
    return _frechet_equal_lambda_ratio(spec, n, theta, settings or QuadratureSettings())


@functools.lru_cache(maxsize=4096)
def _frechet_equal_lambda_ratio(spec, n, theta, settings):
    prof = LambdaProfile(np.zeros(n))
    # the last index loses every tie, which is immaterial for a continuous law
    ri = rank_integrals(spec, prof, n - 1, theta, settings)
    return float(ri.J[theta - 1] / ri.phi[theta - 1])


# verification checks


@dataclass
class CheckRow:
    check: str
    instance_id: int
    i: int
    lhs: float
    rhs: float
    ok: bool
    err_estimate: float

    def as_row(self):
        return [self.check, self.instance_id, self.i, repr(self.lhs), repr(self.rhs),
                int(self.ok), repr(self.err_estimate)]


CHECK_COLUMNS = ["check", "instance_id", "i", "lhs", "rhs", "ok", "err_estimate"]


def check_sigma_ratio_bound(spec: PerturbationSpec, lam, m: int, instance_id: int = 0,
                            settings: QuadratureSettings | None = None) -> list:
    """J_i/phi_i against the rank-only bound for every arm of the profile."""
    settings = settings or QuadratureSettings()
    prof = LambdaProfile(lam)
    sigma = ascending_ranks(prof.lam)
    d = prof.lam.size
    mt = min(m, d)
    rows = []
    for i in range(d):
        ri = rank_integrals(spec, prof, i, mt, settings)
        ph, jj = ri.phi.sum(), ri.J.sum()
        lhs = jj / ph
        rhs = sigma_ratio_bound(spec, int(sigma[i]), m)
        err = ri.err / ph * (1.0 + lhs)
        rows.append(CheckRow("sigma_ratio", instance_id, i, float(lhs), float(rhs),
                             bool(lhs <= rhs + settings.sweep_slack), float(err)))
    return rows


def lambda_star_bound(spec: PerturbationSpec, i: int, m: int, settings=None) -> float:
    """Max over the window offsets w and ranks theta of the equal-lambda ratios.

    ``i`` is the 1-based ascending position of the arm.
    """
    k = min(m, i)
    best = -np.inf
    for w in range(0, k):
        n = i - w
        for theta in range(1, k - w + 1):
            best = max(best, equal_lambda_ratio(spec, n, theta, settings))
    return float(best)


def check_lambda_star_bound(spec: PerturbationSpec, lam, m: int, instance_id: int = 0,
                            settings: QuadratureSettings | None = None) -> list:
    """J_i/phi_i against the equal-lambda reduction, for each arm of a sorted profile."""
    settings = settings or QuadratureSettings()
    lam = np.sort(np.asarray(lam, dtype=float))
    prof = LambdaProfile(lam)
    d = lam.size
    mt = min(m, d)
    cache = {}
    rows = []
    for i in range(d):
        ri = rank_integrals(spec, prof, i, mt, settings)
        ph, jj = ri.phi.sum(), ri.J.sum()
        lhs = jj / ph
        pos = i + 1
        key = min(m, pos), pos
        if key not in cache:
            cache[key] = lambda_star_bound(spec, pos, m, settings)
        rhs = cache[key]
        err = ri.err / ph * (1.0 + lhs)
        rows.append(CheckRow("lambda_star", instance_id, i, float(lhs), float(rhs),
                             bool(lhs <= rhs + settings.sweep_slack), float(err)))
    return rows


# non-monotone ratio for the Frechet(2) derivative integrals


def _frechet2_cdf(x):
    return math.exp(-1.0 / (x * x)) if x > 0 else 0.0


def _frechet2_sf(x):
    return -math.expm1(-1.0 / (x * x)) if x > 0 else 1.0


def counterexample_integral(lam_q0: float, N: int, lam_i: float = 0.5, n_in: int = 4,
                            n_out: int = 2, settings: QuadratureSettings | None = None):
    """int_0^inf (x+lam_i)^-N (1-F(x+lam_q0)) (1-F(x+lam_i))^n_in F(x+lam_i)^n_out dx."""
    settings = settings or QuadratureSettings()

    def f(x):
        y = x + lam_i
        return (y ** -N * _frechet2_sf(x + lam_q0) * _frechet2_sf(y) ** n_in
                * _frechet2_cdf(y) ** n_out)

    val, err = integrate.quad(f, 0.0, np.inf, epsabs=settings.abs_tol * 1e-2,
                              epsrel=settings.rel_tol, limit=settings.limit)
    return val, err


def counterexample_ratio(lam_q0: float, N: int = 3, k: int = 1, lam_i: float = 0.5,
                         settings: QuadratureSettings | None = None, with_error: bool = False):
    """J_{N+k}/J_N for the five-member, two-outsider Frechet(2) configuration."""
    num, e1 = counterexample_integral(lam_q0, N + k, lam_i, settings=settings)
    den, e2 = counterexample_integral(lam_q0, N, lam_i, settings=settings)
    ratio = num / den
    err = abs(ratio) * (e1 / abs(num) + e2 / abs(den))
    return (ratio, err) if with_error else ratio


def counterexample_scan(lo: float = 0.0, hi: float = 5.0, step: float = 0.05, N: int = 3,
                        k: int = 1, lam_i: float = 0.5, settings=None):
    """Evaluate the ratio on a grid; returns (grid, ratios, errors)."""
    n = int(round((hi - lo) / step)) + 1
    grid = lo + step * np.arange(n)
    vals = np.empty(n)
    errs = np.empty(n)
    for t, q in enumerate(grid):
        vals[t], errs[t] = counterexample_ratio(q, N, k, lam_i, settings, with_error=True)
    return grid, vals, errs


def analyze_scan(grid, vals, errs, lam_i: float = 0.5) -> dict:
    """Largest rise and fall between grid neighbours and whether the ratio beats its value at lam_i."""
    diffs = np.diff(vals)
    noise = 10.0 * (errs[1:] + errs[:-1])
    rise = diffs > noise
    fall = -diffs > noise
    base_idx = int(np.argmin(np.abs(grid - lam_i)))
    base = vals[base_idx]
    above = (grid > lam_i + 1e-12) & (vals > base + 10.0 * (errs + errs[base_idx]))
    return {
        "strict_rise": bool(rise.any()),
        "strict_fall": bool(fall.any()),
        "max_rise": float(diffs.max()),
        "max_fall": float(-diffs.min()),
        "base_value": float(base),
        "exceeds_base": bool(above.any()),
        "argmax": float(grid[int(np.argmax(vals))]),
        "max_value": float(vals.max()),
        "max_err": float(errs.max()),
    }
