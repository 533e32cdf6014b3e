"""Budget accounting, batched evaluation and per-epoch trajectory logging."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import Evaluation, Individual, Source, make_rng
from .metrics import (
    MAX_EXACT_OBJECTIVES,
    HvReference,
    build_normalizer,
    distribution_metric,
    hypervolume_exact,
    hypervolume_mc,
    score_individual,
)


class BudgetError(ValueError):
    pass


@dataclass
class Budget:
    total: int
    used: int = 0
    batch_size: int = 50

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.used > self.total:
            raise ValueError("used exceeds total")

    @property
    def remaining(self) -> int:
        return self.total - self.used


@dataclass
class BatchResult:
    evaluations: list
    partial: bool
    groups: list  # number of (design, corner) pairs per parallel group


def batch_evaluate(designs, problem, budget: Budget, workers: int = 1) -> BatchResult:
    """Evaluate every design on every corner, ``batch_size`` pairs at a time.

    Only whole designs are evaluated: if the budget cannot cover a design on
    all corners, it and every later design are skipped and ``partial`` is set.
    Results keep input order whatever the completion order.
    """
    corners = problem.spec.corners
    C = len(corners)
    designs = list(designs)
    n = min(len(designs), budget.remaining // C)
    pairs = [(d, c) for d in range(n) for c in range(C)]

    def work(pair):
        d, c = pair
        return np.asarray(problem.evaluate(designs[d], corners[c]), dtype=float)

    results = [None] * len(pairs)
    groups = []
    pool = ThreadPoolExecutor(min(workers, budget.batch_size)) if workers > 1 else None
    try:
        for start in range(0, len(pairs), budget.batch_size):
            chunk = pairs[start:start + budget.batch_size]
            out = pool.map(work, chunk) if pool else map(work, chunk)
            for k, value in enumerate(out):
                results[start + k] = value
            groups.append(len(chunk))
    finally:
        if pool:
            pool.shutdown()
    budget.used += len(pairs)
    evaluations = []
    for d in range(n):
        block = np.stack(results[d * C:(d + 1) * C], axis=1)
        if not np.all(np.isfinite(block)):
            raise ValueError(f"evaluator returned non-finite responses for design {d}")
        evaluations.append(Evaluation(block, Source.SIMULATED))
    return BatchResult(evaluations, n < len(designs), groups)


class Simulator:
    """Owns the budget and the archive of every simulated individual.

    The constraint-violation normalizer is built from the initial
    population, so :meth:`initialize` must run before :meth:`simulate`.
    """

    def __init__(self, problem, budget: Budget, workers: int = 1):
        self.problem = problem
        self.budget = budget
        self.workers = workers
        self.archive: List[Individual] = []
        self.normalizer = None
        self.first_feasible: Optional[int] = None
        self.groups = 0
        self.partial_epochs = 0

    @property
    def n_corners(self) -> int:
        return self.problem.spec.n_corners

    def affordable_designs(self) -> int:
        return self.budget.remaining // self.n_corners

    def initialize(self, designs) -> list:
        spec = self.problem.spec
        cost = len(designs) * self.n_corners
        if cost > self.budget.remaining:
            raise BudgetError(
                f"budget below initialization cost N·C = {len(designs)}·{self.n_corners} = {cost}"
            )
        result = batch_evaluate(designs, self.problem, self.budget, self.workers)
        self.groups += len(result.groups)
        raw = [score_individual(d, e, spec, None) for d, e in zip(designs, result.evaluations)]
        self.normalizer = build_normalizer(raw, spec)
        pop = [score_individual(ind.design, ind.evaluation, spec, self.normalizer) for ind in raw]
        self._archive(pop, self.budget.used - cost)
        return pop

    def simulate(self, designs) -> list:
        if self.normalizer is None:
            raise RuntimeError("initialize() must run first")
        if not len(designs):
            return []
        spec = self.problem.spec
        before = self.budget.used
        result = batch_evaluate(designs, self.problem, self.budget, self.workers)
        self.groups += len(result.groups)
        if result.partial:
            self.partial_epochs += 1
        inds = [
            score_individual(d, e, spec, self.normalizer)
            for d, e in zip(designs, result.evaluations)
        ]
        self._archive(inds, before)
        return inds

    def _archive(self, inds, used_before: int):
        C = self.n_corners
        for k, ind in enumerate(inds):
            if self.first_feasible is None and ind.cv == 0.0:
                self.first_feasible = used_before + (k + 1) * C
        self.archive.extend(inds)

    def reference(self, margin: float) -> HvReference:
        F = np.array([ind.objectives for ind in self.archive], dtype=float)
        return HvReference.running(F, margin)

    def best_cv(self) -> float:
        return min(ind.cv for ind in self.archive)


RUNLOG_COLUMNS = (
    "epoch", "sims_used", "best_so_far_cv", "feasible_count", "population_hv", "dm", "sim_minutes",
)


@dataclass
class RunLogRow:
    epoch: int
    sims_used: int
    best_so_far_cv: float
    feasible_count: int
    population_hv: Optional[float]
    dm: float
    sim_minutes: float


def population_hv(population: Sequence[Individual], ref: HvReference, seed: int = 0) -> Optional[float]:
    """HV of the feasible members, ``None`` when none is feasible."""
    F = [ind.objectives for ind in population if ind.cv == 0.0]
    if not F:
        return None
    if len(F[0]) > MAX_EXACT_OBJECTIVES:
        return hypervolume_mc(F, ref, 100_000, make_rng(seed))
    return hypervolume_exact(F, ref)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


@dataclass
class RunLog:
    """Per-epoch trajectory. Wall-clock times live in ``wall_ms`` only so
    that the CSV stays byte-reproducible."""

    algorithm: str
    problem: str
    seed: int
    config_hash: str
    rows: List[RunLogRow] = field(default_factory=list)
    wall_ms: List[int] = field(default_factory=list)

    def record(self, epoch: int, simulator: Simulator, population, margin: float,
               minutes_per_sim: float, wall_ms: int = 0) -> RunLogRow:
        ref = simulator.reference(margin)
        feasible = sum(1 for ind in population if ind.cv == 0.0)
        F = np.array([ind.objectives for ind in population], dtype=float)
        row = RunLogRow(
            epoch=epoch,
            sims_used=simulator.budget.used,
            best_so_far_cv=float(simulator.best_cv()),
            feasible_count=feasible,
            population_hv=population_hv(population, ref, seed=epoch),
            dm=distribution_metric(F, ref),
            sim_minutes=float(simulator.groups * minutes_per_sim),
        )
        if self.rows:
            last = self.rows[-1]
            assert row.sims_used > last.sims_used, "sims_used must increase"
            assert row.best_so_far_cv <= last.best_so_far_cv, "best-so-far CV increased"
        self.rows.append(row)
        self.wall_ms.append(int(wall_ms))
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RUNLOG_COLUMNS)
        for row in self.rows:
            writer.writerow([_fmt(getattr(row, c)) for c in RUNLOG_COLUMNS])
        return buf.getvalue()

    def timing_csv(self) -> str:
        lines = ["epoch,wall_ms"]
        lines += [f"{row.epoch},{ms}" for row, ms in zip(self.rows, self.wall_ms)]
        return "\n".join(lines) + "\n"
