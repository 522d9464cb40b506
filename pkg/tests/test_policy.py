import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semiband.analytics import selection_probabilities
from semiband.perturbation import PerturbationSpec, frechet, pareto
from semiband.policy import (
    PolicyState,
    choose_action,
    per_arm_stability_bound,
    play_round,
    theoretical_learning_rate,
    theoretical_regret_bound,
)
from semiband.resampling import ResamplingBudget


def mp_rate(fam, a, m, d, T):
    """Independent 40-digit evaluation of the closed-form learning rates."""
    mpmath.mp.dps = 40
    a = mpmath.mpf(a)
    i = 1 / a
    g = mpmath.gamma(1 - i)
    if fam == "frechet":
        num = (a / (a - 1) * m ** (1 - i) + g) * (d + 1) ** i + m
        den = 2 * (a + 1) * (m + i) ** i * (m + a / (a - 1) * (d - m + 1) ** (1 - i)) * T
    else:
        num = (a * m ** (1 - i) + (a - 1) * g) * (d + 1) ** i
        den = 4 * a**2 * (m + i) ** i * d ** (1 - i) * T
    return float(mpmath.sqrt(num / den))


def mp_bound(fam, a, m, d, T):
    mpmath.mp.dps = 40
    a = mpmath.mpf(a)
    i = 1 / a
    g = mpmath.gamma(1 - i)
    if fam == "frechet":
        return float(2 * mpmath.sqrt(2 * (a + 1) * (m + i) ** i
                                     * (m + a / (a - 1) * (d - m + 1) ** (1 - i))
                                     * ((a / (a - 1) * m ** (1 - i) + g) * (d + 1) ** i + m) * T))
    return float(4 * a / mpmath.sqrt(a - 1) * mpmath.sqrt(
        (m + i) ** i * (a / (a - 1) * m ** (1 - i) + g) * d ** (1 - i) * (d + 1) ** i * T))


# frozen outputs of mp_rate / mp_bound
FROZEN = [
    ("rate", "frechet", 2.0, 1, 1, 1, 0.53606338107744135937),
    ("rate", "pareto", 2.0, 2, 10, 10_000, 0.0043674071113935822528),
    ("bound", "pareto", 2.0, 1, 2, 100, 269.13029174989928607),
    ("bound", "frechet", 2.0, 2, 8, 10_000, 6612.4744150178927221),
]


@pytest.mark.parametrize("kind,fam,a,m,d,T,value", FROZEN)
def test_rate_and_bound_constants_frozen(kind, fam, a, m, d, T, value):
    spec = PerturbationSpec(fam, a)
    got = (theoretical_learning_rate(spec, m, d, T) if kind == "rate"
           else theoretical_regret_bound(spec, m, d, T)["total"])
    assert got == pytest.approx(value, rel=1e-12)


@given(st.sampled_from(["frechet", "pareto"]), st.floats(1.05, 8.0), st.integers(1, 500),
       st.data(), st.integers(1, 10**7))
def test_rate_and_bound_constants_vs_mpmath(fam, a, d, data, T):
    m = data.draw(st.integers(1, d))
    spec = PerturbationSpec(fam, a)
    assert theoretical_learning_rate(spec, m, d, T) == pytest.approx(mp_rate(fam, a, m, d, T), rel=1e-10)
    assert theoretical_regret_bound(spec, m, d, T)["total"] == pytest.approx(
        mp_bound(fam, a, m, d, T), rel=1e-10)


@given(st.sampled_from(["frechet", "pareto"]), st.floats(1.05, 8.0), st.integers(1, 500),
       st.data(), st.integers(1, 10**7))
def test_bound_decomposes_into_its_parts(fam, a, d, data, T):
    m = data.draw(st.integers(1, d))
    spec = PerturbationSpec(fam, a)
    b = theoretical_regret_bound(spec, m, d, T)
    S, P = b["stability_const"], b["penalty_const"]
    assert b["total"] == pytest.approx(2 * math.sqrt(S * P * T), rel=1e-12)
    # the rate balances the two terms: eta = sqrt(P / (S T))
    assert theoretical_learning_rate(spec, m, d, T) == pytest.approx(math.sqrt(P / (S * T)), rel=1e-12)


def test_sqrt_t_scaling():
    for spec in (frechet(2.0), pareto(3.0)):
        r1 = theoretical_learning_rate(spec, 3, 20, 1000)
        r4 = theoretical_learning_rate(spec, 3, 20, 4000)
        assert r4 / r1 == pytest.approx(0.5, rel=1e-14)
        b1 = theoretical_regret_bound(spec, 3, 20, 1000)["total"]
        b4 = theoretical_regret_bound(spec, 3, 20, 4000)["total"]
        assert b4 / b1 == pytest.approx(2.0, rel=1e-14)


def test_dimension_errors():
    with pytest.raises(ValueError):
        theoretical_learning_rate(frechet(2), 0, 3, 10)
    with pytest.raises(ValueError):
        theoretical_regret_bound(frechet(2), 4, 3, 10)
    with pytest.raises(ValueError):
        theoretical_learning_rate(frechet(2), 1, 3, 0)
    with pytest.raises(ValueError):
        per_arm_stability_bound(frechet(2), 1, 0)


def test_per_arm_examples():
    assert per_arm_stability_bound(frechet(2), 1, 1) == pytest.approx(6 * math.sqrt(1.5), rel=1e-14)
    assert per_arm_stability_bound(pareto(2), 1, 1) == pytest.approx(8 * math.sqrt(1.5), rel=1e-14)


@pytest.mark.parametrize("spec", [frechet(1.5), frechet(3.0), pareto(2.0), pareto(4.0)])
def test_per_arm_monotone_beyond_m(spec):
    for m in (1, 3, 8):
        vals = [per_arm_stability_bound(spec, m, s) for s in range(m, 200)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_state_validation():
    with pytest.raises(ValueError):
        PolicyState(d=3, m=4, eta=1.0, spec=frechet(2))
    with pytest.raises(ValueError):
        PolicyState(d=3, m=1, eta=0.0, spec=frechet(2))
    with pytest.raises(ValueError):
        PolicyState(d=3, m=1, eta=1.0, spec=frechet(2), estimator="EXP3")


def test_full_action_round_is_exact():
    rng = np.random.default_rng(0)
    state = PolicyState(d=4, m=4, eta=0.3, spec=pareto(2), estimator="CGR")
    truth = np.zeros(4)
    for _ in range(20):
        loss = rng.random(4)
        out = play_round(state, lambda idx: loss[idx], rng)
        truth += loss
        assert out.action.indices == (0, 1, 2, 3)
        np.testing.assert_allclose(out.est_loss_vector, loss)
    np.testing.assert_allclose(state.cum_est_loss, truth)
    assert state.round == 20


def test_zero_losses_give_uniform_selection():
    d, m, n = 4, 2, 100_000
    rng = np.random.default_rng(1)
    state = PolicyState(d=d, m=m, eta=0.5, spec=frechet(2))
    hits = np.zeros(d)
    for _ in range(n):
        out = play_round(state, lambda idx: np.zeros(len(idx)), rng)
        hits[list(out.action.indices)] += 1
    assert np.all(state.cum_est_loss == 0)
    p = m / d
    assert np.all(np.abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n))


def test_single_round_selection_matches_quadrature():
    c = 1.5
    state = PolicyState(d=2, m=1, eta=1.0, spec=frechet(2), cum_est_loss=[0.0, c])
    phi0 = selection_probabilities(frechet(2), np.array([0.0, c]), 1)[0]
    rng = np.random.default_rng(2)
    n = 1_000_000
    hits = sum(choose_action(state, rng)[0] == 0 for _ in range(n))
    assert abs(hits / n / phi0 - 1) < 0.01


def test_loss_oracle_contract():
    state = PolicyState(d=3, m=2, eta=1.0, spec=frechet(2))
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        play_round(state, lambda idx: np.full(len(idx), 1.5), rng)
    with pytest.raises(ValueError):
        play_round(state, lambda idx: np.zeros(1), rng)
    seen = []

    def oracle(idx):
        seen.append(tuple(idx))
        return np.ones(len(idx))

    out = play_round(state, oracle, rng)
    # only the chosen arms are ever queried
    assert seen == [out.action.indices]
    assert set(np.flatnonzero(out.est_loss_vector)) <= set(out.action.indices)


@pytest.mark.parametrize("estimator", ["GR", "CGR"])
def test_estimates_are_nonnegative_and_cumulative_loss_grows(estimator):
    rng = np.random.default_rng(4)
    env = np.random.default_rng(5)
    state = PolicyState(d=6, m=2, eta=0.2, spec=pareto(2), estimator=estimator)
    prev = state.cum_est_loss.copy()
    for _ in range(200):
        loss = env.random(6)
        out = play_round(state, lambda idx: loss[idx], rng)
        assert np.all(out.est_loss_vector >= 0)
        assert np.all(state.cum_est_loss >= prev)
        prev = state.cum_est_loss.copy()


def test_estimators_share_the_first_action():
    a = PolicyState(d=10, m=3, eta=1.0, spec=frechet(2), estimator="GR")
    b = PolicyState(d=10, m=3, eta=1.0, spec=frechet(2), estimator="CGR")
    oracle = lambda idx: np.ones(len(idx))  # noqa: E731
    ra = play_round(a, oracle, np.random.default_rng(6))
    rb = play_round(b, oracle, np.random.default_rng(6))
    assert ra.action == rb.action


def test_unbiased_loss_estimate():
    """E[1{i chosen} * loss_i * estimate_i] equals loss_i at fixed cumulative losses."""
    rng = np.random.default_rng(7)
    cum = np.array([0.0, 0.5, 1.0, 2.0])
    loss = np.array([0.3, 1.0, 0.6, 0.9])
    n = 40_000
    for est in ("GR", "CGR"):
        acc = np.zeros((n, 4))
        for t in range(n):
            state = PolicyState(d=4, m=2, eta=1.0, spec=frechet(2), estimator=est, cum_est_loss=cum)
            out = play_round(state, lambda idx: loss[idx], rng)
            acc[t] = out.est_loss_vector
        mean = acc.mean(axis=0)
        se = acc.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(mean - loss) <= 3.5 * se), (est, mean, se)


def test_capped_estimate_becomes_warning():
    state = PolicyState(d=4, m=1, eta=1.0, spec=frechet(2), cum_est_loss=[0, 0, 0, 30],
                        budget=ResamplingBudget(1))
    rng = np.random.default_rng(8)
    warned = False
    for _ in range(50):
        out = play_round(state, lambda idx: np.zeros(len(idx)), rng)
        if out.estimate.capped:
            warned = warned or bool(out.warnings)
            assert out.warnings
    assert warned
