"""Surrogate-assisted constrained multi-objective optimization over corners.

GDE3 (generalized differential evolution) and MODEBI, its Gaussian-Process
preselection variant, run against black-box problems whose responses are
evaluated under several operating corners.
"""

from .bench import BenchProblem, bnh, get_problem, problem_from_file, reference_front_hv, toy_regulator
from .core import (
    AlgoConfig,
    Corner,
    Direction,
    Evaluation,
    Individual,
    ProblemError,
    ProblemSpec,
    ResponseSpec,
    VariableKind,
    VariableSpec,
    load_problem,
    validate_problem,
)
from .estimators import ALGORITHMS, GDE3, MODEBI, make_optimizer
from .gp import GridRBFGaussianProcess, RBFGaussianProcess, lcb
from .harness import campaign, run
from .metrics import (
    constrained_dominates,
    crowding_distance,
    distribution_metric,
    greedy_hv_subset,
    hv_contribution,
    hypervolume_exact,
    hypervolume_mc,
    nondominated_sort,
)
from .simulation import Budget, BudgetError, RunLog

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AlgoConfig", "BenchProblem", "Budget", "BudgetError", "Corner", "Direction",
    "Evaluation", "GDE3", "GridRBFGaussianProcess", "Individual", "MODEBI", "ProblemError",
    "ProblemSpec", "RBFGaussianProcess", "ResponseSpec", "RunLog", "VariableKind", "VariableSpec",
    "bnh", "campaign", "constrained_dominates", "crowding_distance", "distribution_metric",
    "get_problem", "greedy_hv_subset", "hv_contribution", "hypervolume_exact", "hypervolume_mc",
    "lcb", "load_problem", "make_optimizer", "nondominated_sort", "problem_from_file",
    "reference_front_hv", "run", "toy_regulator", "validate_problem",
]
