"""Experiment configuration, seeded replications and the resampling benchmark."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .environment import (
    BUILTIN_SCHEDULES,
    TRACE_COLUMNS,
    AdaptiveHook,
    FixedSchedule,
    RegretTrace,
    StochasticBernoulli,
    builtin_schedule,
    load_schedule_csv,
    next_loss,
    pseudo_regret,
    regret_curve,
)
from .perturbation import FAMILY_CODES, PerturbationSpec
from .policy import (
    ESTIMATORS,
    PolicyState,
    play_round,
    theoretical_learning_rate,
    theoretical_regret_bound,
)
from .resampling import DEFAULT_CAP, ResamplingBudget, resampling_cost

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ["replication", "pseudo_regret", "mean_resamples", "cap_events"]
BENCHMARK_COLUMNS = ["d", "m", "estimator", "rounds", "mean_resamples", "se_resamples",
                     "bound", "seconds_per_round"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    d: int
    m: int
    T: int
    family: str = "frechet"
    alpha: float = 2.0
    estimator: str = "GR"
    eta: object = "theoretical"
    environment: dict = field(default_factory=lambda: {"kind": "bernoulli", "gap": 0.5})
    replications: int = 1
    base_seed: int = 0
    output_path: str = "out"
    budget_cap: int = DEFAULT_CAP

    @property
    def spec(self) -> PerturbationSpec:
        return PerturbationSpec(self.family, self.alpha)

    def learning_rate(self) -> float:
        if self.eta == "theoretical":
            return theoretical_learning_rate(self.spec, self.m, self.d, self.T)
        return float(self.eta)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a JSON config; errors name the offending line."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: config must be a JSON object")

    def fail(key, msg):
        raise ConfigError(f"{source}:{_line_of(text, key)}: {key}: {msg}")

    known = set(ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            fail(key, "unknown field")
    for key in ("d", "m", "T"):
        if key not in raw:
            raise ConfigError(f"{source}:1: missing required field {key!r}")
    ints = ("d", "m", "T", "replications", "base_seed", "budget_cap")
    for key in ints:
        if key in raw:
            v = raw[key]
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            if not isinstance(v, int) or isinstance(v, bool):
                fail(key, f"expected an integer, got {v!r}")
            raw[key] = v
    cfg = ExperimentConfig(**raw)
    if cfg.d < 1:
        fail("d", "must be >= 1")
    if not (1 <= cfg.m <= cfg.d):
        fail("m", f"need 1 <= m <= d (d={cfg.d})")
    if cfg.T < 1:
        fail("T", "must be >= 1")
    if cfg.replications < 1:
        fail("replications", "must be >= 1")
    if not (0 <= cfg.base_seed < 2**64):
        fail("base_seed", "must be a 64-bit unsigned integer")
    if cfg.budget_cap < 1:
        fail("budget_cap", "must be >= 1")
    if str(cfg.family).lower() not in FAMILY_CODES:
        fail("family", f"expected one of {sorted(FAMILY_CODES)}")
    cfg.family = str(cfg.family).lower()
    if not isinstance(cfg.alpha, (int, float)) or not cfg.alpha > 1:
        fail("alpha", "must be a number > 1")
    if cfg.estimator not in ESTIMATORS:
        fail("estimator", f"expected one of {list(ESTIMATORS)}")
    if cfg.eta != "theoretical":
        if not isinstance(cfg.eta, (int, float)) or isinstance(cfg.eta, bool) or not cfg.eta > 0:
            fail("eta", "expected \"theoretical\" or a positive number")
    env = cfg.environment
    if not isinstance(env, dict) or "kind" not in env:
        fail("environment", "expected an object with a \"kind\" field")
    kind = env["kind"]
    if kind == "bernoulli":
        if "mu" in env:
            mu = env["mu"]
            if not isinstance(mu, list) or len(mu) != cfg.d:
                fail("mu", f"expected a list of {cfg.d} numbers")
            if any(not isinstance(x, (int, float)) or not 0 <= x <= 1 for x in mu):
                fail("mu", "entries must lie in [0, 1]")
        else:
            gap = env.get("gap", 0.5)
            if not isinstance(gap, (int, float)) or not 0 <= gap <= 1:
                fail("gap", "must lie in [0, 1]")
    elif kind == "schedule":
        if "path" not in env:
            fail("environment", "schedule needs a \"path\"")
    elif kind == "builtin":
        if env.get("name") not in BUILTIN_SCHEDULES:
            fail("environment", f"builtin name must be one of {list(BUILTIN_SCHEDULES)}")
    elif kind == "adaptive":
        if env.get("name", "punish-last") not in ADAPTIVE_HOOKS:
            fail("environment", f"adaptive name must be one of {sorted(ADAPTIVE_HOOKS)}")
    else:
        fail("kind", "expected bernoulli, schedule, builtin or adaptive")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


# adaptive adversaries, referenced by name so they survive pickling


def punish_last(t, history, rng, d, m, low=0.1, high=0.9):
    """Loss high on the arms played last round, low elsewhere."""
    out = np.full(d, low)
    if history:
        out[list(history[-1][1])] = high
    return out


def punish_frequent(t, history, rng, d, m, low=0.1, high=0.9):
    """Loss high on the m arms played most often so far."""
    counts = np.zeros(d)
    for _, a in history:
        counts[list(a)] += 1
    out = np.full(d, low)
    out[np.argsort(-counts, kind="stable")[:m]] = high
    return out


ADAPTIVE_HOOKS = {"punish-last": punish_last, "punish-frequent": punish_frequent}


class _Hook:
    def __init__(self, name, d, m):
        self.fn = ADAPTIVE_HOOKS[name]
        self.d, self.m = d, m

    def __call__(self, t, history, rng):
        return self.fn(t, history, rng, self.d, self.m)


def build_environment(cfg: ExperimentConfig, base_dir: Path | None = None):
    env = cfg.environment
    kind = env["kind"]
    if kind == "bernoulli":
        if "mu" in env:
            mu = np.asarray(env["mu"], dtype=float)
        else:
            gap = float(env.get("gap", 0.5))
            mu = np.full(cfg.d, 0.5 + gap / 2)
            mu[:cfg.m] = 0.5 - gap / 2
        return StochasticBernoulli(mu, cfg.T)
    if kind == "schedule":
        p = Path(env["path"])
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        sched = load_schedule_csv(p)
        if sched.d != cfg.d or sched.T < cfg.T:
            raise ConfigError(f"schedule {p} is {sched.T}x{sched.d}, need at least {cfg.T}x{cfg.d}")
        return FixedSchedule(sched.table[:cfg.T])
    if kind == "builtin":
        return builtin_schedule(env["name"], cfg.d, cfg.m, cfg.T, **env.get("params", {}))
    if kind == "adaptive":
        return AdaptiveHook(_Hook(env.get("name", "punish-last"), cfg.d, cfg.m), cfg.d, cfg.T)
    raise ConfigError(f"unknown environment kind {kind!r}")


def replication_rngs(base_seed: int, r: int):
    """(policy rng, environment rng) for replication r, seeded from base_seed + r."""
    ss = np.random.SeedSequence(base_seed + r)
    pol, env = ss.spawn(2)
    return np.random.default_rng(pol), np.random.default_rng(env)


@dataclass
class ReplicationResult:
    replication: int
    trace: RegretTrace
    pseudo_regret: float
    mean_resamples: float
    cap_events: int
    seconds: float
    curve: np.ndarray = None


def run_replication(cfg: ExperimentConfig, r: int, base_dir: Path | None = None) -> ReplicationResult:
    t0 = time.perf_counter()
    env = build_environment(cfg, base_dir)
    pol_rng, env_rng = replication_rngs(cfg.base_seed, r)
    state = PolicyState(d=cfg.d, m=cfg.m, eta=cfg.learning_rate(), spec=cfg.spec,
                        estimator=cfg.estimator, budget=ResamplingBudget(cfg.budget_cap))
    trace = RegretTrace(cfg.d, cfg.m)
    history = []
    realized = np.empty((cfg.T, cfg.d))
    for t in range(1, cfg.T + 1):
        loss = next_loss(env, t, history, env_rng)
        realized[t - 1] = loss
        out = play_round(state, lambda idx: loss[idx], pol_rng)
        idx = out.action.indices
        trace.record(idx, float(loss[list(idx)].sum()), out.estimate.total_rounds,
                     out.estimate.capped)
        if isinstance(env, AdaptiveHook):
            history.append((loss, idx))
    if isinstance(env, StochasticBernoulli):
        table = env.mean_table()
    elif isinstance(env, FixedSchedule):
        table = env.table
    else:
        table = realized
    reg = pseudo_regret(trace, table)
    return ReplicationResult(r, trace, reg, float(np.mean(trace.resamples)),
                             int(sum(trace.capped)), time.perf_counter() - t0,
                             regret_curve(trace, table))


def _run_one(args):
    cfg, r, base_dir = args
    return run_replication(cfg, r, base_dir)


@dataclass
class RunSummary:
    mean_regret: float
    std_regret: float
    mean_resamples: float
    cap_events: int
    wall_time: float
    bound: float
    eta: float
    regrets: list

    def to_dict(self):
        return asdict(self)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace(path: Path, trace: RegretTrace):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        w.writerows(trace.rows())


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out_dir=None,
                   base_dir: Path | None = None) -> RunSummary:
    """Run all replications; write one trace CSV each, aggregate.csv, regret_curve.csv, summary.json.

    Workers only compute; the parent writes every file in replication order,
    so the CSV bytes do not depend on ``jobs``.
    """
    out = Path(out_dir or cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    work = [(cfg, r, base_dir) for r in range(cfg.replications)]
    jobs = max(1, int(jobs))
    if jobs == 1 or cfg.replications == 1:
        results = [_run_one(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, cfg.replications)) as ex:
            results = list(ex.map(_run_one, work))
    width = max(4, len(str(cfg.replications - 1)))
    for res in results:
        write_trace(out / f"trace_{res.replication:0{width}d}.csv", res.trace)
    with (out / "aggregate.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for res in results:
            w.writerow([res.replication, _fmt(res.pseudo_regret), _fmt(res.mean_resamples),
                        res.cap_events])
    curve = np.mean([res.curve for res in results], axis=0)
    with (out / "regret_curve.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "regret"])
        w.writerows([t + 1, _fmt(v)] for t, v in enumerate(curve))
    regrets = [res.pseudo_regret for res in results]
    summary = RunSummary(
        mean_regret=float(np.mean(regrets)),
        std_regret=float(np.std(regrets, ddof=1)) if len(regrets) > 1 else 0.0,
        mean_resamples=float(np.mean([res.mean_resamples for res in results])),
        cap_events=int(sum(res.cap_events for res in results)),
        wall_time=time.perf_counter() - t0,
        bound=theoretical_regret_bound(cfg.spec, cfg.m, cfg.d, cfg.T)["total"],
        eta=cfg.learning_rate(),
        regrets=regrets,
    )
    payload = {"config": asdict(cfg), "summary": summary.to_dict(),
               "seconds_per_replication": [res.seconds for res in results]}
    (out / "summary.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    log.info("mean pseudo-regret %.3f (bound %.3f) over %d replications",
             summary.mean_regret, summary.bound, cfg.replications)
    return summary


# resampling benchmark


def spread_profile(d: int, spread: float) -> np.ndarray:
    """Scaled cumulative losses eta*L spread evenly over [0, spread]."""
    return np.linspace(0.0, spread, d) if d > 1 else np.zeros(1)


def cost_bound(kind: str, d: int, m: int) -> float:
    return float(d) if kind == "GR" else m + m * math.log(d / m)


def benchmark_resampling(ds, ms, rounds: int, spec: PerturbationSpec, seed: int = 0,
                         spread: float = 1.0, estimators=ESTIMATORS, lazy: bool = True,
                         cap: int = DEFAULT_CAP) -> list:
    """Mean resampling cost per round for each (d, m) cell and estimator.

    Actions are drawn by FTPL at a fixed spread profile; each cell and
    estimator gets its own stream derived from ``seed``.
    """
    rows = []
    budget = ResamplingBudget(cap)
    for d in ds:
        for m in ms:
            if m > d:
                continue
            lam = spread_profile(d, spread)
            for kind in estimators:
                rng = np.random.default_rng([seed, d, m, ESTIMATORS.index(kind)])
                t0 = time.perf_counter()
                cost, capped = resampling_cost(kind, lam, m, spec, rounds, rng, lazy, budget)
                sec = (time.perf_counter() - t0) / rounds
                rows.append({
                    "d": d, "m": m, "estimator": kind, "rounds": rounds,
                    "mean_resamples": float(cost.mean()),
                    "se_resamples": float(cost.std(ddof=1) / math.sqrt(rounds)) if rounds > 1 else 0.0,
                    "bound": cost_bound(kind, d, m),
                    "seconds_per_round": sec,
                    "capped": int(capped.sum()),
                })
    return rows


def write_rows(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([r[c] if not isinstance(r[c], float) else _fmt(r[c]) for c in columns])


def default_jobs() -> int:
    return os.cpu_count() or 1
