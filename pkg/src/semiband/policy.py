"""Follow-the-Perturbed-Leader over m-subsets with GR or CGR loss estimates."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .analytics import stability_constant
from .perturbation import FRECHET, PerturbationSpec, penalty_bound, sample
from .resampling import (
    EstimatorReport,
    ResamplingBudget,
    conditional_geometric_resample,
    geometric_resample,
)
from .selection import Action, top_m_indices

log = logging.getLogger(__name__)

ESTIMATORS = ("GR", "CGR")


def _check_dims(m, d, T=1):
    if not (1 <= m <= d):
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    if T < 1:
        raise ValueError("T must be >= 1")


def theoretical_learning_rate(spec: PerturbationSpec, m: int, d: int, T: int) -> float:
    """Learning rate that balances the penalty and stability terms over T rounds."""
    _check_dims(m, d, T)
    a = spec.alpha
    inv = 1.0 / a
    g = special.gamma(1.0 - inv)
    if spec.family == FRECHET:
        num = (a / (a - 1.0) * m ** (1.0 - inv) + g) * (d + 1.0) ** inv + m
        den = (2.0 * (a + 1.0) * (m + inv) ** inv
               * (m + a / (a - 1.0) * (d - m + 1.0) ** (1.0 - inv)) * T)
    else:
        num = (a * m ** (1.0 - inv) + (a - 1.0) * g) * (d + 1.0) ** inv
        den = 4.0 * a * a * (m + inv) ** inv * d ** (1.0 - inv) * T
    return math.sqrt(num / den)


def theoretical_regret_bound(spec: PerturbationSpec, m: int, d: int, T: int) -> dict:
    """Worst-case pseudo-regret bound at the theoretical learning rate.

    Returns the total together with the penalty constant P (the expected
    top-m perturbation bound) and the stability constant S, so that
    total = 2 sqrt(S P T).
    """
    _check_dims(m, d, T)
    a = spec.alpha
    inv = 1.0 / a
    g = special.gamma(1.0 - inv)
    if spec.family == FRECHET:
        total = 2.0 * math.sqrt(
            2.0 * (a + 1.0) * (m + inv) ** inv
            * (m + a / (a - 1.0) * (d - m + 1.0) ** (1.0 - inv))
            * ((a / (a - 1.0) * m ** (1.0 - inv) + g) * (d + 1.0) ** inv + m) * T
        )
    else:
        total = 4.0 * a / math.sqrt(a - 1.0) * math.sqrt(
            (m + inv) ** inv * (a / (a - 1.0) * m ** (1.0 - inv) + g)
            * d ** (1.0 - inv) * (d + 1.0) ** inv * T
        )
    return {
        "total": total,
        "penalty_const": penalty_bound(spec, d, m),
        "stability_const": stability_constant(spec, m, d),
    }


def per_arm_stability_bound(spec: PerturbationSpec, m: int, sigma_i: int) -> float:
    """Per-round stability contribution of an arm with ascending rank sigma_i, without eta."""
    if sigma_i < 1:
        raise ValueError("sigma_i must be >= 1")
    a = spec.alpha
    inv = 1.0 / a
    if spec.family == FRECHET:
        return 2.0 * (a + 1.0) * ((min(sigma_i, m) + inv) / max(sigma_i - m + 1, 1)) ** inv
    return 4.0 * a * ((min(sigma_i, m) + inv) / sigma_i) ** inv


@dataclass
class PolicyState:
    d: int
    m: int
    eta: float
    spec: PerturbationSpec
    estimator: str = "GR"
    cum_est_loss: np.ndarray = None
    round: int = 0
    budget: ResamplingBudget = field(default_factory=ResamplingBudget)

    def __post_init__(self):
        _check_dims(self.m, self.d)
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError("eta must be positive and finite")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.cum_est_loss is None:
            self.cum_est_loss = np.zeros(self.d)
        else:
            self.cum_est_loss = np.array(self.cum_est_loss, dtype=float)


@dataclass
class RoundOutcome:
    action: Action
    observed_losses: dict
    estimate: EstimatorReport
    est_loss_vector: np.ndarray
    warnings: list = field(default_factory=list)


def choose_action(state: PolicyState, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of the top-m of r - eta * cum_est_loss for a fresh r."""
    r = sample(state.spec, state.d, rng)
    return top_m_indices(r - state.eta * state.cum_est_loss, state.m)


def play_round(state: PolicyState, loss_oracle, rng: np.random.Generator) -> RoundOutcome:
    """One round: select, observe the chosen arms only, estimate, update.

    ``loss_oracle(indices)`` must return the losses of exactly those arms.
    """
    idx = choose_action(state, rng)
    observed = np.asarray(loss_oracle(idx), dtype=float)
    if observed.shape != idx.shape:
        raise ValueError("loss oracle must return one loss per selected arm")
    if np.any(observed < 0) or np.any(observed > 1) or np.isnan(observed).any():
        raise ValueError("losses must lie in [0, 1]")
    if state.estimator == "GR":
        rep = geometric_resample(state.cum_est_loss, state.eta, idx, state.m, state.spec,
                                 rng, state.budget)
    else:
        rep = conditional_geometric_resample(state.cum_est_loss, state.eta, idx, state.m,
                                             state.spec, rng, state.budget)
    est = np.zeros(state.d)
    for i, l in zip(idx, observed):
        est[i] = l * rep.estimates[int(i)]
    warnings = []
    if rep.capped:
        msg = f"round {state.round + 1}: {rep.kind} capped at {state.budget.cap} iterations"
        warnings.append(msg)
        log.warning(msg)
    state.cum_est_loss += est
    state.round += 1
    return RoundOutcome(
        action=Action(tuple(int(i) for i in idx), state.d),
        observed_losses={int(i): float(l) for i, l in zip(idx, observed)},
        estimate=rep,
        est_loss_vector=est,
        warnings=warnings,
    )
