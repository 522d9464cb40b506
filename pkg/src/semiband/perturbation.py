"""Heavy-tailed perturbation laws (Frechet and Pareto) and their order statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

FRECHET = "frechet"
PARETO = "pareto"
FAMILY_CODES = {FRECHET: 0, PARETO: 1}

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class PerturbationSpec:
    """A perturbation family with shape ``alpha`` > 1.

    ``nu`` is the left end of the support: 0 for Frechet, 1 for Pareto.
    """

    family: str
    alpha: float

    def __post_init__(self):
        fam = str(self.family).lower()
        if fam not in FAMILY_CODES:
            raise ValueError(f"unknown perturbation family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if not (math.isfinite(self.alpha) and self.alpha > 1.0):
            raise ValueError(f"alpha must be finite and > 1, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def nu(self) -> float:
        return 0.0 if self.family == FRECHET else 1.0

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]


def frechet(alpha: float) -> PerturbationSpec:
    return PerturbationSpec(FRECHET, alpha)


def pareto(alpha: float) -> PerturbationSpec:
    return PerturbationSpec(PARETO, alpha)


def cdf(spec: PerturbationSpec, x):
    """F(x); zero below the support."""
    x = np.asarray(x, dtype=float)
    a = spec.alpha
    out = np.zeros_like(x)
    if spec.family == FRECHET:
        pos = x > 0
        out[pos] = np.exp(-x[pos] ** (-a))
    else:
        pos = x > 1
        out[pos] = 1.0 - x[pos] ** (-a)
    return out if out.ndim else float(out)


def pdf(spec: PerturbationSpec, x):
    """Density f(x); zero below the support."""
    x = np.asarray(x, dtype=float)
    a = spec.alpha
    out = np.zeros_like(x)
    if spec.family == FRECHET:
        pos = x > 0
        xp = x[pos]
        out[pos] = a * xp ** (-(a + 1.0)) * np.exp(-xp ** (-a))
    else:
        pos = x >= 1
        out[pos] = a * x[pos] ** (-(a + 1.0))
    return out if out.ndim else float(out)


def survival(spec: PerturbationSpec, x):
    """1 - F(x), computed without cancellation in the right tail."""
    x = np.asarray(x, dtype=float)
    a = spec.alpha
    out = np.ones_like(x)
    if spec.family == FRECHET:
        pos = x > 0
        out[pos] = -np.expm1(-x[pos] ** (-a))
    else:
        pos = x > 1
        out[pos] = x[pos] ** (-a)
    return out if out.ndim else float(out)


def inverse_cdf(spec: PerturbationSpec, u):
    """Quantile function on (0, 1); ``u == 0`` is mapped to the smallest positive double."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("uniform input must lie in [0, 1)")
    u = np.where(u == 0.0, _TINY, u)
    inv = 1.0 / spec.alpha
    if spec.family == FRECHET:
        out = (-np.log(u)) ** (-inv)
    else:
        out = (1.0 - u) ** (-inv)
    return out if out.ndim else float(out)


def sample(spec: PerturbationSpec, size, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws by inverse transform of ``rng.random``."""
    return inverse_cdf(spec, rng.random(size))


def gamma(x):
    return special.gamma(x)


def pareto_order_statistic_mean(alpha: float, k: int, n: int) -> float:
    """Mean of the k-th smallest of n i.i.d. Pareto(alpha) draws, alpha > 1.

    Gamma(n+1) Gamma(n-k+1-1/alpha) / (Gamma(n-k+1) Gamma(n+1-1/alpha)). With
    k = n this is the mean of the maximum; descending rank j maps to k = n - j + 1.
    """
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if alpha <= 1.0:
        raise ValueError(f"alpha must exceed 1 for a finite mean, got {alpha}")
    inv = 1.0 / alpha
    return float(
        np.exp(
            special.gammaln(n + 1.0)
            + special.gammaln(n - k - inv + 1.0)
            - special.gammaln(n - k + 1.0)
            - special.gammaln(n - inv + 1.0)
        )
    )


def penalty_bound(spec: PerturbationSpec, d: int, m: int) -> float:
    """Upper bound on E[sum of the m largest of d draws].

    Pareto: (alpha/(alpha-1) m^(1-1/alpha) + Gamma(1-1/alpha)) (d+1)^(1/alpha).
    Frechet adds m to the Pareto value.
    """
    if not (1 <= m <= d):
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    a = spec.alpha
    inv = 1.0 / a
    val = (a / (a - 1.0) * m ** (1.0 - inv) + special.gamma(1.0 - inv)) * (d + 1.0) ** inv
    if spec.family == FRECHET:
        val += m
    return float(val)


def order_statistic_samples(spec: PerturbationSpec, n: int, trials: int,
                            rng: np.random.Generator, chunk: int = 200_000) -> np.ndarray:
    """Return a (trials, n) array of draws sorted in decreasing order per row.

    Memory grows with ``trials * n``; callers that only need moments should
    use :func:`order_statistic_moments`.
    """
    rows = []
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        x = sample(spec, (b, n), rng)
        rows.append(-np.sort(-x, axis=1))
        done += b
    return np.concatenate(rows, axis=0)


def order_statistic_moments(spec: PerturbationSpec, n: int, trials: int,
                            rng: np.random.Generator, chunk: int = 200_000):
    """Monte Carlo mean and standard error of each order statistic (largest first)."""
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        x = -np.sort(-sample(spec, (b, n), rng), axis=1)
        s1 += x.sum(axis=0)
        s2 += (x * x).sum(axis=0)
        done += b
    mean = s1 / trials
    var = np.maximum(s2 / trials - mean**2, 0.0)
    return mean, np.sqrt(var / trials)


def top_m_sum_moments(spec: PerturbationSpec, d: int, m: int, trials: int,
                      rng: np.random.Generator, chunk: int = 200_000):
    """Monte Carlo mean and standard error of the sum of the m largest of d draws."""
    s1 = s2 = 0.0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        x = sample(spec, (b, d), rng)
        top = np.partition(x, d - m, axis=1)[:, d - m:].sum(axis=1)
        s1 += top.sum()
        s2 += (top * top).sum()
        done += b
    mean = s1 / trials
    return mean, math.sqrt(max(s2 / trials - mean * mean, 0.0) / trials)
