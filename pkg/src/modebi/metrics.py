"""Solution-quality machinery.

Constraint violation, Pareto and constrained dominance, nondominated
sorting, crowding distance, hypervolume (exact, Monte Carlo, contributions,
greedy subset selection) and the distribution metric.

All objective vectors are in minimization convention.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Direction, Evaluation, Individual, ProblemSpec, aggregate_worst_case

EPSILON_FLOOR = 1e-12
MAX_EXACT_OBJECTIVES = 8


# -- constraint violation ----------------------------------------------------

def raw_violation(response_value: float, spec) -> float:
    """Distance past the constraint bound, 0 when the constraint holds."""
    if spec.constraint_bound is None:
        raise ValueError(f"response {spec.name!r} has no constraint_bound")
    if spec.direction is Direction.MAXIMIZE:
        return max(spec.constraint_bound - response_value, 0.0)
    return max(response_value - spec.constraint_bound, 0.0)


@dataclass(frozen=True)
class CvNormalizer:
    """Per-(constraint, corner) violation scale taken from the initial population."""

    denominators: np.ndarray  # (n_constraints, C)
    constraint_indices: tuple
    bounds: np.ndarray
    maximize: np.ndarray
    epsilon_floor: float = EPSILON_FLOOR

    @classmethod
    def for_spec(cls, spec: ProblemSpec, denominators=None, epsilon_floor=EPSILON_FLOOR):
        idx = tuple(k for k, r in enumerate(spec.responses) if r.is_constraint)
        bounds = np.array([spec.responses[k].constraint_bound for k in idx], dtype=float)
        maximize = np.array(
            [spec.responses[k].direction is Direction.MAXIMIZE for k in idx], dtype=bool
        )
        if denominators is None:
            denominators = np.ones((len(idx), spec.n_corners))
        denominators = np.maximum(np.asarray(denominators, dtype=float), epsilon_floor)
        return cls(denominators, idx, bounds, maximize, epsilon_floor)

    def violations(self, responses: np.ndarray) -> np.ndarray:
        """Raw violation of every constraint in every corner, shape ``(Nc, C)``."""
        values = np.asarray(responses, dtype=float)[list(self.constraint_indices)]
        bounds = self.bounds[:, None]
        excess = np.where(self.maximize[:, None], bounds - values, values - bounds)
        return np.maximum(excess, 0.0)

    def cv(self, responses: np.ndarray) -> float:
        if not self.constraint_indices:
            return 0.0
        return float(np.mean(self.violations(responses) / self.denominators))


def build_normalizer(initial_pop: Sequence[Individual], spec: ProblemSpec,
                     epsilon_floor: float = EPSILON_FLOOR) -> CvNormalizer:
    """Scale each constraint-corner slot by its worst violation over ``initial_pop``."""
    if not initial_pop:
        raise ValueError("initial population is empty")
    probe = CvNormalizer.for_spec(spec)
    stacked = np.array([probe.violations(ind.evaluation.responses) for ind in initial_pop])
    return CvNormalizer.for_spec(spec, stacked.max(axis=0), epsilon_floor)


def constraint_violation(ind: Individual, norm: CvNormalizer) -> float:
    if ind.evaluation is None:
        raise ValueError("individual has no evaluation")
    return norm.cv(ind.evaluation.responses)


def score_individual(design, evaluation: Evaluation, spec: ProblemSpec,
                     norm: Optional[CvNormalizer]) -> Individual:
    """Attach cached CV and minimization-convention objectives to a design.

    With ``norm=None`` the CV is left unset (initial population, before the
    normalizer exists).
    """
    objectives, _ = aggregate_worst_case(evaluation, spec)
    cv = None if norm is None else norm.cv(evaluation.responses)
    return Individual(np.asarray(design, dtype=float), evaluation, cv, objectives)


# -- dominance and sorting -----------------------------------------------------

def pareto_dominates(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("objective vectors differ in length")
    return bool(np.all(a <= b) and np.any(a < b))


def constrained_dominates(a: Individual, b: Individual) -> bool:
    if a.cv is None or b.cv is None:
        raise ValueError("individual has no evaluation")
    a_feas, b_feas = a.cv == 0.0, b.cv == 0.0
    if a_feas and not b_feas:
        return True
    if not a_feas and not b_feas:
        return a.cv < b.cv
    if a_feas and b_feas:
        return pareto_dominates(a.objectives, b.objectives)
    return False


def dominance_matrix(F: np.ndarray, cv: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when ``i`` constrained-dominates ``j``."""
    F = np.asarray(F, dtype=float)
    cv = np.asarray(cv, dtype=float)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    feas = cv == 0.0
    fi, fj = feas[:, None], feas[None, :]
    return (
        (fi & ~fj)
        | (~fi & ~fj & (cv[:, None] < cv[None, :]))
        | (fi & fj & le & lt)
    )


def sort_arrays(F: np.ndarray, cv: np.ndarray) -> list:
    n = len(cv)
    if n == 0:
        return []
    dom = dominance_matrix(F, cv)
    counts = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        fronts.append([int(i) for i in current])
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
    return fronts


def nondominated_sort(pop: Sequence[Individual]) -> list:
    """Partition ``pop`` into constrained-dominance fronts (lists of indices).

    Indices inside each front are ascending.
    """
    if not pop:
        return []
    F = np.array([ind.objectives for ind in pop], dtype=float)
    cv = np.array([ind.cv for ind in pop], dtype=float)
    return sort_arrays(F, cv)


def crowding_distance(front) -> np.ndarray:
    F = np.atleast_2d(np.asarray(front, dtype=float))
    n = F.shape[0]
    if n <= 2:
        return np.full(n, np.inf)
    cd = np.zeros(n)
    for m in range(F.shape[1]):
        order = np.argsort(F[:, m], kind="stable")
        f = F[order, m]
        span = f[-1] - f[0]
        cd[order[0]] = np.inf
        cd[order[-1]] = np.inf
        if span > 0:
            cd[order[1:-1]] += (f[2:] - f[:-2]) / span
    return cd


def nondominated_mask(P: np.ndarray) -> np.ndarray:
    """Mask of rows not weakly dominated by an earlier-or-better row.

    Of several identical rows only the first is kept.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n <= 1:
        return np.ones(n, dtype=bool)
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    eq = np.all(P[:, None, :] == P[None, :, :], axis=2)
    strict = le & ~eq
    earlier_dup = np.triu(eq, k=1)
    return ~(strict.any(axis=0) | earlier_dup.any(axis=0))


def _nondominated_large(P: np.ndarray) -> np.ndarray:
    # Rows in ascending coordinate-sum order can only be dominated by earlier rows.
    P = P[np.argsort(P.sum(axis=1), kind="stable")]
    kept = np.empty((0, P.shape[1]))
    for row in P:
        if kept.shape[0] and np.any(np.all(kept <= row, axis=1)):
            continue
        kept = np.vstack([kept, row])
    return kept


# -- hypervolume -----------------------------------------------------------------

@dataclass(frozen=True)
class HvReference:
    """Reference point plus an optional per-objective normalization.

    With ``ideal`` and ``nadir`` set, objectives map to
    ``(f - ideal) / (nadir - ideal)`` before ``ref_point`` is applied.
    """

    ref_point: np.ndarray
    ideal: Optional[np.ndarray] = None
    nadir: Optional[np.ndarray] = None

    @classmethod
    def running(cls, F, margin: float = 0.1) -> "HvReference":
        """Reference from every objective vector seen so far.

        The nadir is the componentwise worst value pushed out by ``margin``
        times the observed range; the ideal is the componentwise best. The
        reference point is then the unit vector in normalized space.
        """
        F = np.atleast_2d(np.asarray(F, dtype=float))
        ideal = F.min(axis=0)
        worst = F.max(axis=0)
        span = worst - ideal
        span = np.where(span > 0, span, np.maximum(np.abs(worst), 1.0))
        nadir = worst + margin * span
        return cls(np.ones(F.shape[1]), ideal, nadir)

    def normalize(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        if self.ideal is None:
            return F
        return (F - self.ideal) / (self.nadir - self.ideal)


def as_reference(ref) -> HvReference:
    if isinstance(ref, HvReference):
        return ref
    return HvReference(np.asarray(ref, dtype=float))


def _hv2(pts, ref) -> float:
    pts = sorted(pts)
    area = 0.0
    prev = ref[1]
    rx = ref[0]
    for p in pts:
        if p[1] < prev:
            area += (rx - p[0]) * (prev - p[1])
            prev = p[1]
    return area


def _hv3(pts, ref) -> float:
    pts = sorted(pts, key=lambda p: p[2])
    rx, ry, rz = ref[0], ref[1], ref[2]
    xs, ys = [], []
    area = 0.0
    total = 0.0
    n = len(pts)
    for k, p in enumerate(pts):
        x, y = p[0], p[1]
        pos = bisect_left(xs, x)
        dominated = (pos > 0 and ys[pos - 1] <= y) or (
            pos < len(xs) and xs[pos] == x and ys[pos] <= y
        )
        if not dominated:
            end = pos
            while end < len(xs) and ys[end] >= y:
                end += 1
            del xs[pos:end]
            del ys[pos:end]
            xs.insert(pos, x)
            ys.insert(pos, y)
            area = 0.0
            prev = ry
            for xi, yi in zip(xs, ys):
                area += (rx - xi) * (prev - yi)
                prev = yi
        upper = pts[k + 1][2] if k + 1 < n else rz
        total += area * (upper - p[2])
    return total


def _hv_recursive(pts, ref, m) -> float:
    if not pts:
        return 0.0
    if m == 1:
        return ref[0] - min(p[0] for p in pts)
    if m == 2:
        return _hv2(pts, ref)
    if m == 3:
        return _hv3(pts, ref)
    # Slice along the last objective, sweeping upward.
    last = m - 1
    pts = sorted(pts, key=lambda p: p[last])
    total = 0.0
    active = []
    n = len(pts)
    for k, p in enumerate(pts):
        head = p[:last]
        if not any(all(a <= b for a, b in zip(q, head)) for q in active):
            active = [q for q in active if not all(b <= a for a, b in zip(q, head))]
            active.append(head)
        upper = pts[k + 1][last] if k + 1 < n else ref[last]
        height = upper - p[last]
        if height > 0:
            total += height * _hv_recursive(active, ref, last)
    return total


def _hv_normalized(P: np.ndarray, r: np.ndarray) -> float:
    """Exact HV of rows of ``P`` (already normalized, all strictly below ``r``)."""
    if P.shape[0] == 0:
        return 0.0
    if P.shape[0] == 1:
        return float(np.prod(r - P[0]))
    if P.shape[1] == 2:
        return float(_hv2(P.tolist(), r.tolist()))
    P = P[nondominated_mask(P)] if P.shape[0] <= 1000 else _nondominated_large(P)
    return float(_hv_recursive([tuple(row) for row in P.tolist()], tuple(r.tolist()), P.shape[1]))


def _inside(P: np.ndarray, r: np.ndarray) -> np.ndarray:
    if P.size == 0:
        return P.reshape(0, r.shape[0])
    return P[np.all(P < r, axis=1)]


def hypervolume_exact(points, ref) -> float:
    """Lebesgue measure dominated by ``points`` and bounded by the reference.

    Points that do not strictly dominate the reference point (after
    normalization) are dropped. Uses dimension-sweep slicing down to a
    sorted 3-D / 2-D sweep.
    """
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    if r.shape[0] > MAX_EXACT_OBJECTIVES:
        raise ValueError(
            f"exact hypervolume supports at most {MAX_EXACT_OBJECTIVES} objectives; "
            "use hypervolume_mc"
        )
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return 0.0
    P = _inside(ref.normalize(np.atleast_2d(P)), r)
    return _hv_normalized(P, r)


def hypervolume_mc(points, ref, samples: int, rng: np.random.Generator,
                   chunk: int = 200_000) -> float:
    """Monte Carlo hypervolume estimate over the box spanned by the points and ref."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return 0.0
    P = _inside(ref.normalize(np.atleast_2d(P)), r)
    if P.shape[0] == 0:
        return 0.0
    lo = P.min(axis=0)
    volume = float(np.prod(r - lo))
    hits = 0
    remaining = samples
    while remaining > 0:
        n = min(chunk, remaining)
        u = lo + rng.random((n, r.shape[0])) * (r - lo)
        dominated = np.zeros(n, dtype=bool)
        for p in P:
            dominated |= np.all(u >= p, axis=1)
        hits += int(dominated.sum())
        remaining -= n
    return volume * hits / samples


def _contribution_normalized(p: np.ndarray, base: np.ndarray, r: np.ndarray) -> float:
    if not np.all(p < r):
        return 0.0
    box = float(np.prod(r - p))
    if base.shape[0] == 0:
        return box
    if np.any(np.all(base <= p, axis=1)):
        return 0.0
    limited = _inside(np.maximum(base, p), r)
    return box - _hv_normalized(limited, r)


def hv_contribution(point, base, ref) -> float:
    """Hypervolume added by ``point`` on top of ``base``."""
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    p = ref.normalize(np.asarray(point, dtype=float))
    B = np.asarray(base, dtype=float)
    B = np.empty((0, r.shape[0])) if B.size == 0 else _inside(ref.normalize(np.atleast_2d(B)), r)
    return _contribution_normalized(p, B, r)


def hv_contributions(points, base, ref) -> np.ndarray:
    """Vector of :func:`hv_contribution` for every row of ``points``."""
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    P = ref.normalize(np.atleast_2d(np.asarray(points, dtype=float)))
    B = np.asarray(base, dtype=float)
    B = np.empty((0, r.shape[0])) if B.size == 0 else _inside(ref.normalize(np.atleast_2d(B)), r)
    return np.array([_contribution_normalized(p, B, r) for p in P])


def exclusive_contributions(points, ref) -> np.ndarray:
    """HV each point adds to the rest of the set (its exclusive share)."""
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    P = ref.normalize(np.atleast_2d(np.asarray(points, dtype=float)))
    out = np.zeros(P.shape[0])
    for i in range(P.shape[0]):
        rest = _inside(np.delete(P, i, axis=0), r)
        out[i] = _contribution_normalized(P[i], rest, r)
    return out


def greedy_hv_subset(points, base, k: int, ref) -> list:
    """Pick ``k`` rows of ``points`` one at a time, each maximizing the HV it adds.

    The running base is ``base`` plus the rows already picked. Ties go to the
    lower index. Evaluation is lazy: HV contributions only shrink as the base
    grows, so a stale upper bound that stays on top is re-evaluated before use.
    """
    ref = as_reference(ref)
    r = np.asarray(ref.ref_point, dtype=float)
    P = ref.normalize(np.atleast_2d(np.asarray(points, dtype=float)))
    n = P.shape[0]
    k = min(k, n)
    if k <= 0:
        return []
    B = np.asarray(base, dtype=float)
    B = np.empty((0, r.shape[0])) if B.size == 0 else _inside(ref.normalize(np.atleast_2d(B)), r)
    heap = [(-_contribution_normalized(P[i], B, r), i, 0) for i in range(n)]
    heapq.heapify(heap)
    picked = []
    while len(picked) < k:
        neg, i, stamp = heapq.heappop(heap)
        if stamp == len(picked):
            picked.append(i)
            if np.all(P[i] < r):
                B = np.vstack([B, P[i]])
            continue
        fresh = _contribution_normalized(P[i], B, r)
        heapq.heappush(heap, (-fresh, i, len(picked)))
    return picked


# -- distribution metric -----------------------------------------------------------

def distribution_metric(pop_objectives, ref) -> float:
    """Spread-and-uniformity score of a set of objective vectors.

    Per objective the normalized values are sorted; with consecutive gaps of
    mean ``mu`` and standard deviation ``sigma`` and range ``S`` the term is
    ``S / (1 + sigma / mu)`` (0 when ``mu == 0``). The result is the mean
    over objectives. Zero for fewer than two distinct points.
    """
    F = np.asarray(pop_objectives, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2:
        return 0.0
    Z = as_reference(ref).normalize(F)
    V = np.sort(Z, axis=0)
    gaps = np.diff(V, axis=0)
    mu = gaps.mean(axis=0)
    sigma = gaps.std(axis=0)
    spread = V[-1] - V[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mu > 0, spread / (1.0 + sigma / np.where(mu > 0, mu, 1.0)), 0.0)
    return float(terms.mean())


def pick_by_cv_dm(cvs, candidate_F, selected_F, ref) -> int:
    """Index of the best candidate under the bi-objective (CV, DM gain) rule.

    Among the candidates nondominated for (minimize CV, maximize DM gain) the
    one with the lowest CV wins, then the highest DM gain, then the lowest
    index. The lowest-CV member of that front is always a global CV minimum,
    so DM gains only need evaluating across CV ties.
    """
    cvs = np.asarray(cvs, dtype=float)
    best = cvs.min()
    tied = np.flatnonzero(cvs == best)
    if tied.size == 1:
        return int(tied[0])
    selected_F = np.asarray(selected_F, dtype=float).reshape(-1, np.shape(candidate_F)[1])
    base_dm = distribution_metric(selected_F, ref)
    gains = [
        distribution_metric(np.vstack([selected_F, candidate_F[i]]), ref) - base_dm
        for i in tied
    ]
    return int(tied[int(np.argmax(gains))])
