"""Loss generators and pseudo-regret accounting."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np


def _check_losses(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"loss vector must have shape ({d},), got {x.shape}")
    if np.isnan(x).any() or np.any(x < 0) or np.any(x > 1):
        raise ValueError("losses must lie in [0, 1]")
    return x


@dataclass
class StochasticBernoulli:
    mu: np.ndarray
    T: int

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        _check_losses(self.mu, self.mu.size)

    @property
    def d(self):
        return self.mu.size

    def mean_table(self):
        return np.broadcast_to(self.mu, (self.T, self.d))


@dataclass
class FixedSchedule:
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if self.table.ndim != 2:
            raise ValueError("schedule must be a T x d table")
        if np.isnan(self.table).any() or self.table.min() < 0 or self.table.max() > 1:
            raise ValueError("schedule losses must lie in [0, 1]")

    @property
    def d(self):
        return self.table.shape[1]

    @property
    def T(self):
        return self.table.shape[0]


@dataclass
class AdaptiveHook:
    """Adversary that sees the full past: ``hook(t, history, rng)`` returns a loss vector.

    ``history`` is a list of (loss vector, action indices) for rounds 1..t-1.
    """

    hook: Callable
    d: int
    T: int


EnvironmentSpec = StochasticBernoulli | FixedSchedule | AdaptiveHook


def next_loss(env, t: int, history, rng: np.random.Generator) -> np.ndarray:
    """Loss vector for round t (1-based)."""
    if t < 1 or t > env.T:
        raise ValueError(f"round {t} outside 1..{env.T}")
    if isinstance(env, StochasticBernoulli):
        return (rng.random(env.d) < env.mu).astype(float)
    if isinstance(env, FixedSchedule):
        return env.table[t - 1].copy()
    if isinstance(env, AdaptiveHook):
        return _check_losses(env.hook(t, history, rng), env.d)
    raise TypeError(f"unknown environment {type(env).__name__}")


# built-in oblivious schedules


def constant_gap_schedule(d: int, m: int, T: int, gap: float = 0.2, base: float = 0.5):
    """Arms 0..m-1 cost base - gap/2, the rest base + gap/2, every round."""
    lo, hi = base - gap / 2, base + gap / 2
    row = np.full(d, hi)
    row[:m] = lo
    return FixedSchedule(np.clip(np.tile(row, (T, 1)), 0.0, 1.0))


def sinusoidal_schedule(d: int, T: int, period: float | None = None, amplitude: float = 0.4):
    """0.5 + amplitude * sin(2 pi t / period + 2 pi i / d); phases spread across arms."""
    period = period or max(T / 4.0, 1.0)
    t = np.arange(1, T + 1)[:, None]
    phase = 2.0 * np.pi * np.arange(d)[None, :] / d
    return FixedSchedule(np.clip(0.5 + amplitude * np.sin(2 * np.pi * t / period + phase), 0, 1))


def switching_schedule(d: int, m: int, T: int, low: float = 0.1, high: float = 0.9):
    """Cheap set alternates between arms 0..m-1 and the next m arms every T/10 rounds."""
    block = max(T // 10, 1)
    table = np.full((T, d), high)
    other = np.arange(m, min(2 * m, d)) if d > m else np.arange(m)
    for t in range(T):
        cheap = np.arange(m) if (t // block) % 2 == 0 else other
        table[t, cheap] = low
    return FixedSchedule(table)


BUILTIN_SCHEDULES = ("constant-gap", "sinusoidal", "switching")


def builtin_schedule(name: str, d: int, m: int, T: int, **kw) -> FixedSchedule:
    if name == "constant-gap":
        return constant_gap_schedule(d, m, T, **kw)
    if name == "sinusoidal":
        return sinusoidal_schedule(d, T, **kw)
    if name == "switching":
        return switching_schedule(d, m, T, **kw)
    raise ValueError(f"unknown schedule {name!r}; choose from {BUILTIN_SCHEDULES}")


def load_schedule_csv(path) -> FixedSchedule:
    """Read a header ``t,loss_0,...,loss_{d-1}`` CSV with one row per round."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        if header[0] != "t" or header[1:] != [f"loss_{i}" for i in range(d)]:
            raise ValueError(f"{path}:1: header must be t,loss_0,...,loss_{{d-1}}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            if int(row[0]) != len(rows) + 1:
                raise ValueError(f"{path}:{lineno}: rounds must be numbered 1, 2, ...")
            vals = [float(v) for v in row[1:]]
            if any(not (0.0 <= v <= 1.0) for v in vals):
                raise ValueError(f"{path}:{lineno}: losses must lie in [0, 1]")
            rows.append(vals)
    return FixedSchedule(np.array(rows))


def save_schedule_csv(schedule: FixedSchedule, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"loss_{i}" for i in range(schedule.d)])
        for t, row in enumerate(schedule.table, start=1):
            w.writerow([t] + [repr(float(v)) for v in row])


# regret accounting


@dataclass
class RegretTrace:
    d: int
    m: int
    actions: list = field(default_factory=list)
    round_loss: list = field(default_factory=list)
    resamples: list = field(default_factory=list)
    capped: list = field(default_factory=list)

    def record(self, action, realized_loss: float, resamples: int, capped: bool):
        self.actions.append(tuple(int(i) for i in action))
        self.round_loss.append(float(realized_loss))
        self.resamples.append(int(resamples))
        self.capped.append(bool(capped))

    def __len__(self):
        return len(self.actions)

    def action_matrix(self) -> np.ndarray:
        a = np.zeros((len(self), self.d))
        for t, idx in enumerate(self.actions):
            a[t, list(idx)] = 1.0
        return a

    def cumulative_loss(self) -> np.ndarray:
        return np.cumsum(self.round_loss)

    def rows(self):
        for t in range(len(self)):
            yield [t + 1, ";".join(str(i) for i in self.actions[t]),
                   repr(self.round_loss[t]), self.resamples[t], int(self.capped[t])]


TRACE_COLUMNS = ["t", "action_indices", "round_loss", "resamples", "capped"]


def hindsight_optimum(true_losses, m: int) -> np.ndarray:
    """Best fixed action: the m arms with the smallest column sums (lowest index on ties)."""
    tot = np.asarray(true_losses, dtype=float).sum(axis=0)
    return np.sort(np.argsort(tot, kind="stable")[:m])


def pseudo_regret(trace: RegretTrace, true_losses) -> float:
    """sum_t <a_t, l_t> - min_a sum_t <a, l_t> over the rounds in the trace."""
    L = np.asarray(true_losses, dtype=float)
    if L.ndim != 2 or L.shape != (len(trace), trace.d):
        raise ValueError(f"loss table shape {L.shape} does not match trace ({len(trace)}, {trace.d})")
    played = float((trace.action_matrix() * L).sum())
    best = hindsight_optimum(L, trace.m)
    return played - float(L[:, best].sum())


def realized_round_loss(action, losses) -> float:
    return float(np.asarray(losses)[list(action)].sum())


def regret_curve(trace: RegretTrace, true_losses) -> np.ndarray:
    """Regret against the final hindsight optimum after each round."""
    L = np.asarray(true_losses, dtype=float)
    best = hindsight_optimum(L, trace.m)
    played = np.cumsum((trace.action_matrix() * L).sum(axis=1))
    return played - np.cumsum(L[:, best].sum(axis=1))
