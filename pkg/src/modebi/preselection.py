"""Surrogate preselection: candidate generation, HSel / PSel offspring
selection, PSv / ISv survival and the epoch that wires them together.

Scenario identifiers::

    modebi-s1  Pareto survival   + hereditary selection
    modebi-s2  improved survival + pooled selection
    modebi-s3  improved survival + hereditary selection
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .core import AlgoConfig, Individual, ProblemSpec, aggregate_worst_case
from .evolve import _design_matrix, de_variation, nondominated_prune, pair_survivors, prune_indices
from .gp import SurrogateBank, batch_predict, optimistic_responses
from .metrics import (
    CvNormalizer,
    HvReference,
    exclusive_contributions,
    greedy_hv_subset,
    hv_contribution,
    hv_contributions,
    pick_by_cv_dm,
)

SCENARIOS = {
    "modebi-s1": ("psv", "hsel"),
    "modebi-s2": ("isv", "psel"),
    "modebi-s3": ("isv", "hsel"),
}


@dataclass(frozen=True)
class Candidate:
    parent_index: int
    individual: Individual


@dataclass(frozen=True)
class OffspringBatch:
    candidates: tuple
    multiplier: int

    def __len__(self):
        return len(self.candidates)

    def for_parent(self, i: int) -> list:
        return [c.individual for c in self.candidates if c.parent_index == i]


class Band(str, Enum):
    FEASIBLE_VS_FEASIBLE = "FeasibleVsFeasible"
    INFEASIBLE_VS_INFEASIBLE = "InfeasibleVsInfeasible"
    FEASIBLE_VS_INFEASIBLE = "FeasibleVsInfeasible"
    # parent feasible, offspring not: ranked below every other band
    REGRESSION = "Regression"


@dataclass(frozen=True)
class ImprovementScore:
    value: float
    band: Band


def generate_candidates(pop, config: AlgoConfig, rng: np.random.Generator,
                        spec: ProblemSpec) -> OffspringBatch:
    """``offspring_multiplier`` rounds of one DE offspring per parent.

    Donors are re-drawn every round. Candidates are ordered round-major.
    """
    designs = _design_matrix(pop)
    out = []
    for _ in range(config.offspring_multiplier):
        for i in range(designs.shape[0]):
            x = de_variation(designs, i, config.F, config.CR, rng, spec)
            out.append(Candidate(i, Individual(x)))
    return OffspringBatch(tuple(out), config.offspring_multiplier)


def surrogate_score(batch: OffspringBatch, models: SurrogateBank, norm: CvNormalizer,
                    spec: ProblemSpec, K: float) -> OffspringBatch:
    """Attach GP predictions plus optimistic CV and objectives to every candidate."""
    if not len(batch):
        return batch
    evaluations = batch_predict(models, [c.individual.design for c in batch.candidates])
    scored = []
    for cand, ev in zip(batch.candidates, evaluations):
        optimistic = optimistic_responses(ev, K, spec)
        objectives, _ = aggregate_worst_case(optimistic, spec)
        ind = Individual(cand.individual.design, ev, norm.cv(optimistic), objectives)
        scored.append(Candidate(cand.parent_index, ind))
    return OffspringBatch(tuple(scored), batch.multiplier)


def _feasible_objectives(inds: Sequence[Individual]) -> np.ndarray:
    F = [ind.objectives for ind in inds if ind.cv == 0.0]
    return np.array(F, dtype=float) if F else np.empty((0, 0))


def improvement_score(parent: Individual, offspring: Individual, base, ref) -> ImprovementScore:
    """Score of ``offspring`` against its ``parent``.

    ``base`` holds the objectives of the feasible population without the parent.
    """
    p_feas, o_feas = parent.cv == 0.0, offspring.cv == 0.0
    diff = parent.cv - offspring.cv
    if p_feas and o_feas:
        gain = hv_contribution(offspring.objectives, base, ref) - hv_contribution(parent.objectives, base, ref)
        return ImprovementScore(gain, Band.FEASIBLE_VS_FEASIBLE)
    if not p_feas and not o_feas:
        return ImprovementScore(1.0 + diff, Band.INFEASIBLE_VS_INFEASIBLE)
    if o_feas:
        return ImprovementScore(10.0 + diff, Band.FEASIBLE_VS_INFEASIBLE)
    return ImprovementScore(-10.0 - offspring.cv, Band.REGRESSION)


def hereditary_select(batch: OffspringBatch, pop: Sequence[Individual], quota: int,
                      ref: HvReference) -> List[Tuple[int, Individual]]:
    """At most one offspring per parent; returns ``(parent_index, offspring)``.

    Each parent's winner is its feasible offspring adding the most HV to the
    feasible population, or its lowest-CV offspring when none is feasible.
    Winners are ranked by :func:`improvement_score` and the top ``quota`` kept
    (ties to the lower parent index).
    """
    N = len(pop)
    if quota > N:
        raise ValueError(f"quota {quota} exceeds the {N} parents")
    feasible_pop = [i for i, ind in enumerate(pop) if ind.cv == 0.0]
    base_all = _feasible_objectives(pop)
    winners, scores = {}, {}
    for i in range(N):
        offspring = batch.for_parent(i)
        if not offspring:
            continue
        feas = [o for o in offspring if o.cv == 0.0]
        if feas:
            gains = hv_contributions([o.objectives for o in feas], base_all, ref)
            best = feas[int(np.argmax(gains))]
        else:
            best = min(offspring, key=lambda o: o.cv)
        winners[i] = best
        others = [pop[j].objectives for j in feasible_pop if j != i]
        base = np.array(others) if others else np.empty((0, 0))
        scores[i] = improvement_score(pop[i], best, base, ref).value
    ranked = sorted(winners, key=lambda i: (-scores[i], i))
    return [(i, winners[i]) for i in ranked[:quota]]


def _top_population(pop_F: np.ndarray, max_pop: int, ref) -> np.ndarray:
    if pop_F.shape[0] <= max_pop:
        return pop_F
    excl = exclusive_contributions(pop_F, ref)
    order = sorted(range(len(excl)), key=lambda k: (-excl[k], k))
    return pop_F[sorted(order[:max_pop])]


def _fill_by_cv_dm(picked: list, pool: Sequence[Individual], candidates: list,
                   context_F: list, target: int, ref) -> list:
    remaining = list(candidates)
    chosen_F = list(context_F) + [pool[i].objectives for i in picked]
    picked = list(picked)
    while len(picked) < target and remaining:
        cvs = [pool[i].cv for i in remaining]
        cand_F = np.array([pool[i].objectives for i in remaining], dtype=float)
        k = pick_by_cv_dm(cvs, cand_F, np.array(chosen_F, dtype=float), ref)
        chosen = remaining.pop(k)
        picked.append(chosen)
        chosen_F.append(pool[chosen].objectives)
    return picked


def pooled_select(batch: OffspringBatch, pop: Sequence[Individual], quota: int,
                  config: AlgoConfig, ref: HvReference) -> List[Individual]:
    """Best ``quota`` offspring from the whole batch, ignoring parentage.

    With more surrogate-feasible candidates than ``quota`` they are picked
    greedily by HV added to the top ``max_pop`` feasible members plus the
    picks so far; otherwise every feasible candidate is taken and the rest
    filled by the CV/DM rule relative to the population plus the picks.
    """
    if quota < 1:
        raise ValueError("quota must be >= 1")
    pool = [c.individual for c in batch.candidates]
    feas = [i for i, ind in enumerate(pool) if ind.cv == 0.0]
    if len(feas) > quota:
        cons = _top_population(_feasible_objectives(pop), config.max_pop, ref)
        picks = greedy_hv_subset([pool[i].objectives for i in feas], cons, quota, ref)
        return [pool[feas[k]] for k in picks]
    infeasible = [i for i in range(len(pool)) if pool[i].cv != 0.0]
    picked = _fill_by_cv_dm(feas, pool, infeasible, [ind.objectives for ind in pop], quota, ref)
    return [pool[i] for i in picked]


def pareto_survival(pop: Sequence[Individual], selected, N: int) -> list:
    """Parent-vs-offspring replacement for selected pairs, then prune to ``N``.

    ``selected`` must be ``(parent_index, simulated offspring)`` pairs as
    produced by :func:`hereditary_select`.
    """
    children = {}
    for item in selected:
        if not (isinstance(item, tuple) and len(item) == 2):
            raise TypeError("pareto_survival needs (parent_index, offspring) pairs from hereditary selection")
        children[int(item[0])] = item[1]
    return nondominated_prune(pair_survivors(pop, children), N)


def improved_survival(pop: Sequence[Individual], offspring: Sequence[Individual], N: int,
                      hv_fraction: float, ref: HvReference) -> list:
    """Feasible-first survival over ``pop + offspring``.

    If at least ``N`` members are feasible, ``round(hv_fraction * N)`` are
    picked greedily by HV and the rest by rank and crowding distance among
    the remaining feasible ones. Otherwise every feasible member survives and
    infeasible ones are added one at a time by the CV/DM rule relative to
    those already chosen. Survivors keep pool order.
    """
    pool = list(pop) + list(offspring)
    if len(pool) < N:
        raise ValueError(f"pool of {len(pool)} cannot fill a population of {N}")
    feas = [i for i, ind in enumerate(pool) if ind.cv == 0.0]
    if len(feas) >= N:
        k = min(N, int(round(hv_fraction * N)))
        F = np.array([pool[i].objectives for i in feas], dtype=float)
        first = [feas[j] for j in greedy_hv_subset(F, np.empty((0, 0)), k, ref)]
        taken = set(first)
        rest = [i for i in feas if i not in taken]
        if N - k > 0:
            kept = prune_indices([pool[i] for i in rest], N - k)
            first += [rest[j] for j in kept]
        chosen = first
    else:
        infeasible = [i for i in range(len(pool)) if pool[i].cv != 0.0]
        chosen = _fill_by_cv_dm(feas, pool, infeasible, [], N, ref)
    return [pool[i] for i in sorted(chosen)]


def modebi_epoch(pop: Sequence[Individual], simulator, models: SurrogateBank,
                 config: AlgoConfig, scenario: str, rng: np.random.Generator):
    """One MODEBI iteration; returns ``(population, models)``.

    Retrain GPs on the archive, generate ``offspring_multiplier * N``
    candidates, score them with the surrogate, select ``quota`` for
    simulation and apply the scenario's survival policy.
    """
    try:
        survival, selector = SCENARIOS[scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}") from None
    spec = simulator.problem.spec
    N = config.pop_size
    models.fit(simulator.archive)
    batch = generate_candidates(pop, config, rng, spec)
    batch = surrogate_score(batch, models, simulator.normalizer, spec, config.K)
    ref = simulator.reference(config.hv_margin)
    quota = config.quota
    if quota == 0:
        return list(pop), models
    if selector == "hsel":
        pairs = hereditary_select(batch, pop, quota, ref)
        designs = [off.design for _, off in pairs]
    else:
        chosen = pooled_select(batch, pop, quota, config, ref)
        designs = [off.design for off in chosen]
    simulated = simulator.simulate(designs)
    ref = simulator.reference(config.hv_margin)
    if survival == "psv":
        linked = [(pairs[k][0], ind) for k, ind in enumerate(simulated)]
        return pareto_survival(pop, linked, N), models
    return improved_survival(pop, simulated, N, config.hv_fraction, ref), models
