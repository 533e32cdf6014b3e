"""DE/rand/1/bin variation and the GDE3 generation step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AlgoConfig, Individual, ProblemSpec, repair_design
from .metrics import constrained_dominates, crowding_distance, nondominated_sort


@dataclass(frozen=True)
class DeDraw:
    r1: int
    r2: int
    r3: int
    j_rand: int
    crossover_mask: np.ndarray


def draw_de(rng: np.random.Generator, n: int, target_index: int, n_dims: int, CR: float) -> DeDraw:
    """Random choices for one DE/rand/1/bin offspring.

    Draw order: three distinct donors (without replacement, never the
    target), then ``j_rand``, then ``n_dims`` uniforms for the crossover mask.
    """
    if n < 4:
        raise ValueError("DE/rand/1 needs a population of at least 4")
    picks = rng.choice(n - 1, size=3, replace=False)
    r1, r2, r3 = (int(p) + int(p >= target_index) for p in picks)
    j_rand = int(rng.integers(n_dims))
    mask = rng.random(n_dims) < CR
    mask[j_rand] = True
    return DeDraw(r1, r2, r3, j_rand, mask)


def apply_de(designs: np.ndarray, target_index: int, draw: DeDraw, F: float) -> np.ndarray:
    """Mutant ``p_r1 + F (p_r2 - p_r3)`` where the mask is set, parent elsewhere."""
    mutant = designs[draw.r1] + F * (designs[draw.r2] - designs[draw.r3])
    return np.where(draw.crossover_mask, mutant, designs[target_index])


def _design_matrix(pop) -> np.ndarray:
    if isinstance(pop, np.ndarray):
        return pop
    return np.array([ind.design for ind in pop], dtype=float)


def de_variation(pop, target_index: int, F: float, CR: float,
                 rng: np.random.Generator, spec: ProblemSpec) -> np.ndarray:
    """One repaired DE/rand/1/bin offspring of member ``target_index``."""
    designs = _design_matrix(pop)
    draw = draw_de(rng, designs.shape[0], target_index, designs.shape[1], CR)
    return repair_design(apply_de(designs, target_index, draw, F), spec)


def prune_indices(pop: Sequence[Individual], N: int) -> list:
    """Sorted indices of the ``N`` members kept by :func:`nondominated_prune`."""
    if len(pop) < N:
        raise ValueError(f"cannot prune {len(pop)} individuals up to {N}")
    if len(pop) == N:
        return list(range(N))
    keep = []
    for front in nondominated_sort(pop):
        room = N - len(keep)
        if room <= 0:
            break
        if len(front) <= room:
            keep.extend(front)
            continue
        cd = crowding_distance([pop[i].objectives for i in front])
        order = sorted(range(len(front)), key=lambda k: (-cd[k], front[k]))
        keep.extend(front[k] for k in order[:room])
    return sorted(keep)


def nondominated_prune(pop: Sequence[Individual], N: int) -> list:
    """Keep ``N`` members: whole fronts first, the cut front by crowding distance.

    Ties in crowding distance go to the lower input index; survivors keep
    their input order.
    """
    return [pop[i] for i in prune_indices(pop, N)]


def pair_survivors(parents: Sequence[Individual], children: dict) -> list:
    """Parent-vs-child replacement used by GDE3 and Pareto survival.

    ``children`` maps parent index to its simulated child. The dominating
    one takes the parent's slot; when neither dominates, the child is kept
    too and appended after all slots.
    """
    slots, extra = [], []
    for i, parent in enumerate(parents):
        child = children.get(i)
        if child is None:
            slots.append(parent)
        elif constrained_dominates(child, parent):
            slots.append(child)
        elif constrained_dominates(parent, child):
            slots.append(parent)
        else:
            slots.append(parent)
            extra.append(child)
    return slots + extra


def gde3_epoch(pop: Sequence[Individual], simulator, config: AlgoConfig,
               rng: np.random.Generator) -> list:
    """One GDE3 generation: one offspring per member, simulate, compare, prune.

    When the budget cannot cover every offspring only the leading ones
    (whole designs) are simulated; the simulator records the partial epoch.
    """
    spec = simulator.problem.spec
    designs = _design_matrix(pop)
    offspring = [de_variation(designs, i, config.F, config.CR, rng, spec) for i in range(len(pop))]
    children = simulator.simulate(offspring)
    merged = pair_survivors(pop, dict(enumerate(children)))
    return nondominated_prune(merged, config.pop_size)
