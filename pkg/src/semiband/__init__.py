"""FTPL for size-invariant combinatorial semi-bandits with geometric and
conditional geometric resampling."""
from .perturbation import PerturbationSpec, frechet, pareto
from .policy import PolicyState, play_round, theoretical_learning_rate, theoretical_regret_bound
from .resampling import (
    EstimatorReport,
    ResamplingBudget,
    conditional_geometric_resample,
    geometric_resample,
)
from .selection import Action, ascending_ranks, select_top_m

__all__ = [
    "Action",
    "EstimatorReport",
    "PerturbationSpec",
    "PolicyState",
    "ResamplingBudget",
    "ascending_ranks",
    "conditional_geometric_resample",
    "frechet",
    "geometric_resample",
    "pareto",
    "play_round",
    "select_top_m",
    "theoretical_learning_rate",
    "theoretical_regret_bound",
]
__version__ = "0.1.0"
