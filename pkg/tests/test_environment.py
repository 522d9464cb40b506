import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semiband.environment import (
    AdaptiveHook,
    FixedSchedule,
    RegretTrace,
    StochasticBernoulli,
    builtin_schedule,
    hindsight_optimum,
    load_schedule_csv,
    next_loss,
    pseudo_regret,
    regret_curve,
    save_schedule_csv,
)


def brute_force_best(L, m):
    """Minimum total loss over every m-subset."""
    tot = L.sum(axis=0)
    return min(sum(tot[list(a)]) for a in itertools.combinations(range(L.shape[1]), m))


@given(st.integers(1, 10), st.integers(1, 6), st.data())
def test_hindsight_matches_enumeration(d, T, data):
    m = data.draw(st.integers(1, d))
    L = data.draw(arrays(float, (T, d), elements=st.sampled_from([0.0, 0.25, 0.5, 1.0])))
    best = hindsight_optimum(L, m)
    assert len(best) == m
    assert L[:, best].sum() == pytest.approx(brute_force_best(L, m), abs=1e-12)


def test_bernoulli_examples():
    rng = np.random.default_rng(0)
    env = StochasticBernoulli(np.zeros(3), T=10)
    assert all(np.all(next_loss(env, t, [], rng) == 0) for t in range(1, 11))
    env = StochasticBernoulli(np.full(4, 0.5), T=100_000)
    x = np.array([next_loss(env, t, [], rng) for t in range(1, 100_001)])
    assert np.all(np.abs(x.mean(axis=0) - 0.5) <= 3 * math.sqrt(0.25 / 100_000))
    with pytest.raises(ValueError):
        next_loss(env, 0, [], rng)
    with pytest.raises(ValueError):
        StochasticBernoulli([0.5, 1.2], T=3)


def test_schedule_reads_rows_verbatim():
    table = np.random.default_rng(1).random((5, 3))
    env = FixedSchedule(table)
    for t in range(1, 6):
        np.testing.assert_array_equal(next_loss(env, t, [], None), table[t - 1])
    with pytest.raises(ValueError):
        FixedSchedule(np.full((2, 2), 2.0))


def test_adaptive_hook_sees_history_and_is_checked():
    calls = []

    def hook(t, history, rng):
        calls.append((t, len(history)))
        return np.full(3, 0.5)

    env = AdaptiveHook(hook, d=3, T=4)
    history = []
    for t in range(1, 5):
        loss = next_loss(env, t, history, np.random.default_rng(0))
        history.append((loss, (0,)))
    assert calls == [(1, 0), (2, 1), (3, 2), (4, 3)]
    bad = AdaptiveHook(lambda t, h, r: np.full(3, 1.1), d=3, T=2)
    with pytest.raises(ValueError):
        next_loss(bad, 1, [], None)
    wrong = AdaptiveHook(lambda t, h, r: np.zeros(2), d=3, T=2)
    with pytest.raises(ValueError):
        next_loss(wrong, 1, [], None)


@pytest.mark.parametrize("name", ["constant-gap", "sinusoidal", "switching"])
def test_builtin_schedules_valid(name):
    s = builtin_schedule(name, 6, 2, 50)
    assert s.table.shape == (50, 6)
    assert s.table.min() >= 0 and s.table.max() <= 1


def test_switching_flips_every_tenth():
    s = builtin_schedule("switching", 4, 1, 100)
    cheap = s.table.argmin(axis=1)
    assert list(cheap[:10]) == [0] * 10 and list(cheap[10:20]) == [1] * 10
    with pytest.raises(ValueError):
        builtin_schedule("nope", 4, 1, 10)


def test_schedule_csv_round_trip(tmp_path):
    s = builtin_schedule("sinusoidal", 3, 1, 7)
    p = tmp_path / "s.csv"
    save_schedule_csv(s, p)
    assert p.read_text().splitlines()[0] == "t,loss_0,loss_1,loss_2"
    np.testing.assert_array_equal(load_schedule_csv(p).table, s.table)


@pytest.mark.parametrize("body,line", [
    ("t,loss_0\n1,0.5\n2,1.5\n", 3),
    ("t,loss_0\n1,0.5\n3,0.5\n", 3),
    ("t,loss_0,loss_1\n1,0.5\n", 2),
    ("t,x\n1,0.5\n", 1),
])
def test_schedule_csv_errors_name_the_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ValueError, match=rf"bad.csv:{line}:"):
        load_schedule_csv(p)


def test_pseudo_regret_examples():
    T = 30
    L = np.tile([0.0, 1.0], (T, 1))
    tr = RegretTrace(2, 1)
    for _ in range(T):
        tr.record((1,), 1.0, 1, False)
    assert pseudo_regret(tr, L) == T
    tr = RegretTrace(2, 1)
    for _ in range(T):
        tr.record((0,), 0.0, 1, False)
    assert pseudo_regret(tr, L) == 0.0
    with pytest.raises(ValueError):
        pseudo_regret(tr, L[:-1])


def test_regret_curve_ends_at_pseudo_regret():
    rng = np.random.default_rng(2)
    L = rng.random((40, 5))
    tr = RegretTrace(5, 2)
    for t in range(40):
        a = tuple(sorted(rng.choice(5, 2, replace=False)))
        tr.record(a, L[t, list(a)].sum(), 1, False)
    curve = regret_curve(tr, L)
    assert curve[-1] == pytest.approx(pseudo_regret(tr, L))
    assert tr.rows().__next__()[0] == 1
