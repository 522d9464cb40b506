import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from semiband.perturbation import (
    PerturbationSpec,
    cdf,
    frechet,
    gamma,
    inverse_cdf,
    order_statistic_moments,
    pareto,
    pareto_order_statistic_mean,
    pdf,
    penalty_bound,
    sample,
    survival,
    top_m_sum_moments,
)

alphas = st.sampled_from([1.1, 1.5, 2.0, 3.0, 7.5])
families = st.sampled_from(["frechet", "pareto"])


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec("frechet", 1.0)
    with pytest.raises(ValueError):
        PerturbationSpec("pareto", 0.5)
    with pytest.raises(ValueError):
        PerturbationSpec("gumbel", 2.0)
    with pytest.raises(ValueError):
        PerturbationSpec("pareto", float("inf"))
    assert frechet(2).nu == 0.0 and pareto(2).nu == 1.0
    assert PerturbationSpec("Pareto", 2).family == "pareto"


def test_cdf_examples():
    assert cdf(pareto(2), 1.0) == 0.0
    assert cdf(frechet(2), 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert cdf(pareto(2), 2.0) == 0.75
    assert cdf(frechet(2), -3.0) == 0.0 and cdf(pareto(2), 0.5) == 0.0


def test_pdf_examples():
    assert pdf(pareto(2), 1.0) == 2.0
    assert pdf(frechet(2), 1.0) == pytest.approx(2 * math.exp(-1), rel=1e-15)
    assert pdf(pareto(3), 2.0) == pytest.approx(0.1875, rel=1e-15)
    assert pdf(frechet(2), 0.0) == 0.0 and pdf(pareto(2), 0.99) == 0.0


def test_inverse_cdf_examples():
    assert inverse_cdf(pareto(2), 0.75) == pytest.approx(2.0, rel=1e-15)
    assert inverse_cdf(frechet(2), math.exp(-1)) == pytest.approx(1.0, rel=1e-15)
    # a zero uniform is nudged onto the support instead of producing inf
    assert math.isfinite(inverse_cdf(frechet(2), 0.0))
    assert inverse_cdf(pareto(2), 0.0) == 1.0
    with pytest.raises(ValueError):
        inverse_cdf(pareto(2), 1.0)


@given(families, alphas, st.floats(1e-9, 1 - 1e-9))
def test_inverse_cdf_round_trip(fam, a, u):
    spec = PerturbationSpec(fam, a)
    assert abs(cdf(spec, inverse_cdf(spec, u)) - u) <= 1e-12


@given(families, alphas, st.floats(0.01, 1e4))
def test_survival_matches_cdf(fam, a, x):
    spec = PerturbationSpec(fam, a)
    assert survival(spec, x) == pytest.approx(1.0 - cdf(spec, x), abs=1e-14)
    assert 0.0 <= cdf(spec, x) <= 1.0


@pytest.mark.parametrize("fam", ["frechet", "pareto"])
@pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
def test_pdf_normalizes(fam, a):
    spec = PerturbationSpec(fam, a)
    lo = spec.nu
    body, _ = integrate.quad(lambda x: pdf(spec, x), lo, lo + 1.0, epsabs=1e-13, epsrel=1e-12)
    tail, _ = integrate.quad(lambda x: pdf(spec, x), lo + 1.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert body + tail == pytest.approx(1.0, abs=1e-8)


def test_sample_is_inverse_transform_of_stream():
    spec = frechet(2.5)
    a = sample(spec, 1000, np.random.default_rng(7))
    u = np.random.default_rng(7).random(1000)
    np.testing.assert_array_equal(a, inverse_cdf(spec, u))


def test_pareto_sample_mean():
    x = sample(pareto(2), 1_000_000, np.random.default_rng(1))
    assert x.min() >= 1.0
    assert abs(x.mean() / 2.0 - 1.0) < 0.01


def test_frechet_samples_follow_cdf():
    from scipy import stats

    spec = frechet(3.0)
    x = sample(spec, 200_000, np.random.default_rng(2))
    assert stats.kstest(x, lambda v: cdf(spec, v)).statistic < 0.005


def test_gamma_against_mpmath():
    xs = np.concatenate([np.linspace(1e-3, 1, 40), np.linspace(1, 50, 200), [0.5, 1 / 3, 2 / 3]])
    for x in xs:
        exact = float(mpmath.gamma(mpmath.mpf(float(x))))
        assert abs(gamma(x) / exact - 1.0) <= 1e-10


def test_gautschi_sandwich():
    for x in np.linspace(0.05, 40.0, 120):
        for s in np.arange(1, 10) / 10:
            mid = gamma(x + 1) / gamma(x + s)
            assert x ** (1 - s) < mid < (x + 1) ** (1 - s)


# mpmath evaluation of the k-th smallest Pareto order-statistic mean, frozen
ORDER_STAT_ORACLE = {
    (2.0, 1, 1): 2.0,
    (2.0, 5, 5): 4.0634920634920634921,  # Gamma(6)Gamma(1/2)/Gamma(11/2)
    (2.0, 1, 3): 1.2,
}


@pytest.mark.parametrize("key", sorted(ORDER_STAT_ORACLE))
def test_order_statistic_mean_frozen(key):
    a, k, n = key
    assert pareto_order_statistic_mean(a, k, n) == pytest.approx(ORDER_STAT_ORACLE[key], rel=1e-12)


@given(st.floats(1.05, 6.0), st.integers(1, 30), st.data())
def test_order_statistic_mean_vs_mpmath(a, n, data):
    k = data.draw(st.integers(1, n))
    i = 1 / mpmath.mpf(a)
    exact = (mpmath.gamma(n + 1) * mpmath.gamma(n - k - i + 1)
             / (mpmath.gamma(n - k + 1) * mpmath.gamma(n - i + 1)))
    assert pareto_order_statistic_mean(a, k, n) == pytest.approx(float(exact), rel=1e-10)


def test_order_statistic_mean_errors():
    with pytest.raises(ValueError):
        pareto_order_statistic_mean(1.0, 1, 2)
    with pytest.raises(ValueError):
        pareto_order_statistic_mean(2.0, 0, 2)
    with pytest.raises(ValueError):
        pareto_order_statistic_mean(2.0, 3, 2)


def test_order_statistic_mean_matches_monte_carlo():
    """k counts from the bottom: k = n is the maximum and k = 1 the minimum."""
    rng = np.random.default_rng(3)
    mean5, _ = order_statistic_moments(pareto(2), 5, 10_000_000, rng)
    assert abs(mean5[0] / pareto_order_statistic_mean(2, 5, 5) - 1) < 0.01
    mean3, _ = order_statistic_moments(pareto(2), 3, 10_000_000, rng)
    assert abs(mean3[2] / pareto_order_statistic_mean(2, 1, 3) - 1) < 0.01
    assert abs(mean3[0] / pareto_order_statistic_mean(2, 3, 3) - 1) < 0.01


def test_penalty_bound_examples():
    base = (2 + math.sqrt(math.pi)) * math.sqrt(2)
    assert penalty_bound(pareto(2), 1, 1) == pytest.approx(base, rel=1e-14)
    assert penalty_bound(frechet(2), 1, 1) == pytest.approx(base + 1, rel=1e-14)
    with pytest.raises(ValueError):
        penalty_bound(pareto(2), 3, 4)


def test_penalty_bound_dominates_monte_carlo():
    mean, se = top_m_sum_moments(pareto(2), 8, 3, 1_000_000, np.random.default_rng(4))
    assert mean <= penalty_bound(pareto(2), 8, 3)
