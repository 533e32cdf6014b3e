"""Optimizers with a scikit-learn style surface.

``fit(problem)`` runs the algorithm until the simulation budget is spent
and stores results in trailing-underscore attributes; ``get_params`` /
``set_params`` / ``clone`` work as for any estimator.

>>> from modebi import GDE3, bnh
>>> opt = GDE3(pop_size=20, budget=400, seed=1).fit(bnh())
>>> opt.n_sims_
400
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import AlgoConfig, make_rng, repair_design
from .evolve import gde3_epoch
from .gp import GridRBFGaussianProcess, RBFGaussianProcess, SurrogateBank
from .metrics import hypervolume_exact
from .preselection import SCENARIOS, modebi_epoch
from .simulation import Budget, RunLog, Simulator, population_hv

ALGORITHMS = ("gde3",) + tuple(SCENARIOS)


def initial_designs(spec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random designs over the bound box, repaired (integers rounded)."""
    lo, hi = spec.lower, spec.upper
    raw = lo + rng.random((n, spec.n_variables)) * (hi - lo)
    return np.array([repair_design(x, spec) for x in raw])


class _Optimizer(BaseEstimator):
    algorithm = None

    def _config(self) -> AlgoConfig:
        names = {f.name for f in dataclasses.fields(AlgoConfig)}
        return AlgoConfig(**{k: v for k, v in self.get_params().items() if k in names})

    def _start(self, simulator, config, rng):
        return None

    def _epoch(self, pop, simulator, config, rng, state):
        raise NotImplementedError

    def fit(self, problem, y=None):
        config = self._config()
        spec = problem.spec
        rng = make_rng(config.seed)
        budget = Budget(config.budget, 0, config.batch_size)
        simulator = Simulator(problem, budget, self.workers)
        log = RunLog(self.algorithm, spec.name, config.seed, config.digest())

        tic = time.perf_counter()
        pop = simulator.initialize(initial_designs(spec, config.pop_size, rng))
        state = self._start(simulator, config, rng)
        log.record(0, simulator, pop, config.hv_margin, config.minutes_per_sim,
                   (time.perf_counter() - tic) * 1000)
        epoch = 0
        while simulator.affordable_designs() > 0:
            epoch += 1
            tic = time.perf_counter()
            pop = self._epoch(pop, simulator, config, rng, state)
            log.record(epoch, simulator, pop, config.hv_margin, config.minutes_per_sim,
                       (time.perf_counter() - tic) * 1000)

        self.population_ = pop
        self.runlog_ = log
        self.simulator_ = simulator
        self.archive_ = simulator.archive
        self.n_sims_ = budget.used
        self.first_feasible_ = simulator.first_feasible
        self.normalizer_ = simulator.normalizer
        self.partial_epochs_ = simulator.partial_epochs
        return self

    @property
    def pareto_front_(self):
        """Objectives of the feasible nondominated members of the final population."""
        check_is_fitted(self, "population_")
        F = np.array([ind.objectives for ind in self.population_ if ind.cv == 0.0])
        if F.size == 0:
            return F
        from .metrics import nondominated_mask
        return F[nondominated_mask(F)]

    def final_hv(self, ref=None) -> float:
        """HV of the feasible final population.

        ``ref=None`` uses the running normalized reference; a raw point
        evaluates in raw objective units.
        """
        check_is_fitted(self, "population_")
        if ref is None:
            value = population_hv(self.population_, self.simulator_.reference(self._config().hv_margin))
            return 0.0 if value is None else value
        F = [ind.objectives for ind in self.population_ if ind.cv == 0.0]
        return hypervolume_exact(F, ref) if F else 0.0


class GDE3(_Optimizer):
    """Generalized differential evolution (DE/rand/1/bin, constrained dominance)."""

    algorithm = "gde3"

    def __init__(self, pop_size=100, F=0.5, CR=0.9, budget=15000, batch_size=50,
                 hv_margin=0.1, minutes_per_sim=1.0, seed=0, workers=1):
        self.pop_size = pop_size
        self.F = F
        self.CR = CR
        self.budget = budget
        self.batch_size = batch_size
        self.hv_margin = hv_margin
        self.minutes_per_sim = minutes_per_sim
        self.seed = seed
        self.workers = workers

    def _epoch(self, pop, simulator, config, rng, state):
        return gde3_epoch(pop, simulator, config, rng)


class MODEBI(_Optimizer):
    """GDE3 with Gaussian-Process preselection of offspring.

    Parameters
    ----------
    scenario : {"modebi-s1", "modebi-s2", "modebi-s3"}
        Survival/selection pairing (PSv+HSel, ISv+PSel, ISv+HSel).
    K : float
        Exploration weight of the confidence bound.
    offspring_multiplier : int
        Candidates generated per parent each epoch.
    replace_quota : int or None
        Designs simulated per epoch; ``None`` means ``pop_size // 4``.
    max_pop : int
        Feasible population members considered by pooled selection.
    hv_fraction : float
        Share of improved-survival slots filled greedily by HV.
    gp_train_cap : int
        Maximum GP training rows (design x corner pairs), newest first.
    gp_hyper_subsample : int
        Rows used for the hyperparameter search.
    gp_warm_start : bool
        After the first epoch, refine GP hyperparameters locally around the
        previous optimum instead of repeating the full grid search.
    """

    def __init__(self, scenario="modebi-s2", pop_size=100, F=0.5, CR=0.9, K=2.0,
                 offspring_multiplier=10, replace_quota=None, budget=15000, batch_size=50,
                 max_pop=50, hv_fraction=0.5, gp_train_cap=2000, gp_hyper_subsample=200,
                 gp_warm_start=True, hv_margin=0.1, minutes_per_sim=1.0, seed=0, workers=1, gp_n_jobs=1):
        self.scenario = scenario
        self.pop_size = pop_size
        self.F = F
        self.CR = CR
        self.K = K
        self.offspring_multiplier = offspring_multiplier
        self.replace_quota = replace_quota
        self.budget = budget
        self.batch_size = batch_size
        self.max_pop = max_pop
        self.hv_fraction = hv_fraction
        self.gp_train_cap = gp_train_cap
        self.gp_hyper_subsample = gp_hyper_subsample
        self.gp_warm_start = gp_warm_start
        self.hv_margin = hv_margin
        self.minutes_per_sim = minutes_per_sim
        self.seed = seed
        self.workers = workers
        self.gp_n_jobs = gp_n_jobs

    @property
    def algorithm(self):
        return self.scenario

    def _start(self, simulator, config, rng):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        # the Kronecker solve only pays off with several corners
        model = GridRBFGaussianProcess if simulator.n_corners > 1 else RBFGaussianProcess
        template = model(hyper_subsample=config.gp_hyper_subsample, train_cap=config.gp_train_cap,
                         warm_start=config.gp_warm_start)
        return SurrogateBank(simulator.problem.spec, template, config.gp_train_cap, self.gp_n_jobs)

    def _epoch(self, pop, simulator, config, rng, state):
        pop, _ = modebi_epoch(pop, simulator, state, config, self.scenario, rng)
        return pop


def make_optimizer(algorithm: str, config: AlgoConfig, workers: int = 1):
    """Estimator for a CLI algorithm id configured from ``config``."""
    params = config.to_dict()
    if algorithm == "gde3":
        keep = GDE3().get_params()
        return GDE3(**{k: v for k, v in params.items() if k in keep}, workers=workers)
    if algorithm in SCENARIOS:
        keep = MODEBI().get_params()
        return MODEBI(scenario=algorithm, **{k: v for k, v in params.items() if k in keep},
                      workers=workers)
    raise ValueError(f"unknown algorithm {algorithm!r}")
