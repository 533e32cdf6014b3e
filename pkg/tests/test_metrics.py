import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ind, make_small_spec, random_population
from modebi.core import Direction, Evaluation, ResponseSpec, make_rng
from modebi.metrics import (
    EPSILON_FLOOR,
    CvNormalizer,
    HvReference,
    build_normalizer,
    constrained_dominates,
    constraint_violation,
    crowding_distance,
    distribution_metric,
    exclusive_contributions,
    greedy_hv_subset,
    hv_contribution,
    hv_contributions,
    hypervolume_exact,
    hypervolume_mc,
    nondominated_mask,
    nondominated_sort,
    pareto_dominates,
    pick_by_cv_dm,
    raw_violation,
    score_individual,
)


# -- oracles ----------------------------------------------------------------------

def hv_grid_oracle(points, ref):
    """Coordinate-compression union volume: sum of dominated grid cells."""
    P = np.asarray(points, dtype=float)
    ref = np.asarray(ref, dtype=float)
    P = P[np.all(P < ref, axis=1)]
    if len(P) == 0:
        return 0.0
    axes = [np.unique(np.r_[P[:, m], ref[m]]) for m in range(P.shape[1])]
    total = 0.0
    for cell in itertools.product(*[range(len(a) - 1) for a in axes]):
        lo = np.array([axes[m][c] for m, c in enumerate(cell)])
        if np.any(np.all(P <= lo, axis=1)):
            total += float(np.prod([axes[m][c + 1] - axes[m][c] for m, c in enumerate(cell)]))
    return total


def fronts_oracle(pop):
    """Peel fronts with plain pairwise constrained-dominance checks."""
    remaining = list(range(len(pop)))
    fronts = []
    while remaining:
        front = [i for i in remaining
                 if not any(constrained_dominates(pop[j], pop[i]) for j in remaining if j != i)]
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


def naive_greedy(points, base, k, ref):
    picked = []
    for _ in range(min(k, len(points))):
        current = np.array([points[i] for i in picked] + list(base)).reshape(-1, len(ref))
        gains = [(-hv_contribution(points[i], current, ref), i) for i in range(len(points)) if i not in picked]
        picked.append(min(gains)[1])
    return picked


points_2d3d = st.integers(2, 3).flatmap(
    lambda m: st.lists(st.lists(st.integers(0, 6), min_size=m, max_size=m), min_size=0, max_size=9)
)


# -- constraint violation -----------------------------------------------------------

def test_raw_violation_examples():
    upper = ResponseSpec("g", Direction.MINIMIZE, 5.0)
    lower = ResponseSpec("psrr", Direction.MAXIMIZE, 60.0)
    assert raw_violation(7.5, upper) == 2.5
    assert raw_violation(5.0, upper) == 0.0
    assert raw_violation(55.0, lower) == 5.0
    with pytest.raises(ValueError):
        raw_violation(1.0, ResponseSpec("f", Direction.MINIMIZE, None, True))


def _one_constraint_pop(spec, violations):
    # spec has constraint g <= 5 in response row 2; place violations on corner 0
    out = []
    for v in violations:
        R = np.zeros((3, 3))
        R[1] = 100.0
        R[2] = 5.0
        R[2, 0] = 5.0 + v
        out.append(ind([0.0, 0.0], 0.0).__class__(np.zeros(2), Evaluation(R)))
    return out


def test_normalizer_uses_max_and_floor():
    spec = make_small_spec()
    norm = build_normalizer(_one_constraint_pop(spec, [0.0, 2.0, 4.0]), spec)
    # constraints: f2 >= 60 (row 1) and g <= 5 (row 2)
    assert norm.denominators[1, 0] == 4.0
    assert norm.denominators[0, 0] == EPSILON_FLOOR
    single = build_normalizer(_one_constraint_pop(spec, [3.0]), spec)
    assert single.denominators[1, 0] == 3.0


def test_floor_keeps_cv_finite():
    spec = make_small_spec()
    norm = build_normalizer(_one_constraint_pop(spec, [0.0, 0.0, 0.0]), spec)
    R = np.zeros((3, 3))
    R[1] = 100.0
    R[2] = 6.0
    cv = norm.cv(R)
    assert np.isfinite(cv) and cv > 0


def test_cv_is_mean_of_normalized_slots():
    spec = make_small_spec()
    norm = CvNormalizer.for_spec(spec, denominators=[[4.0, 2.0, 2.0], [4.0, 2.0, 2.0]])
    R = np.array([[0.0] * 3, [60.0, 60.0, 60.0], [7.0, 5.0, 6.0]])  # raw g-violations {2, 0, 1}
    assert norm.cv(R) == pytest.approx((0.5 + 0.0 + 0.5) / 6)
    assert norm.cv(np.array([[0.0] * 3, [60.0] * 3, [5.0] * 3])) == 0.0


def test_score_individual_uses_worst_case(small_spec):
    R = np.array([[1.0, 3.0, 2.0], [40.0, 38.0, 45.0], [4.0, 4.0, 4.0]])
    norm = CvNormalizer.for_spec(small_spec)
    scored = score_individual([1.0, 2.0], Evaluation(R), small_spec, norm)
    assert scored.objectives.tolist() == [3.0, -38.0]
    assert scored.cv == pytest.approx(np.mean([20, 22, 15, 0, 0, 0]))
    assert constraint_violation(scored, norm) == scored.cv
    assert score_individual([1.0, 2.0], Evaluation(R), small_spec, None).cv is None


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 100.0), st.integers(0, 2**31 - 1))
def test_cv_invariant_under_rescaling(scale, seed):
    spec = make_small_spec()
    rng = np.random.default_rng(seed)

    def pop(factor):
        out = []
        for k in range(6):
            R = rng_state[k].copy()
            R[2] = 5.0 + (R[2] - 5.0) * factor
            out.append(ind([0, 0]).__class__(np.zeros(2), Evaluation(R)))
        return out

    rng_state = [np.vstack([np.zeros(3), 60.0 + rng.normal(0, 5, 3), 5.0 + rng.normal(0, 2, 3)]) for _ in range(6)]
    a, b = pop(1.0), pop(scale)
    na, nb = build_normalizer(a, spec), build_normalizer(b, spec)
    for x, y in zip(a, b):
        assert constraint_violation(x, na) == pytest.approx(constraint_violation(y, nb), rel=1e-9, abs=1e-12)


def test_cv_zero_iff_no_raw_violation(rng):
    spec = make_small_spec()
    norm = CvNormalizer.for_spec(spec, denominators=rng.random((2, 3)) + 0.1)
    for _ in range(200):
        R = np.vstack([np.zeros(3), 60.0 + rng.integers(-2, 3, 3), 5.0 + rng.integers(-2, 3, 3)])
        raw = [raw_violation(R[k, c], spec.responses[k]) for k in (1, 2) for c in range(3)]
        assert (norm.cv(R) == 0.0) == all(v == 0.0 for v in raw)


# -- dominance ------------------------------------------------------------------

def test_pareto_examples():
    assert pareto_dominates((1, 1), (2, 2))
    assert not pareto_dominates((1, 2), (2, 1)) and not pareto_dominates((2, 1), (1, 2))
    assert not pareto_dominates((1, 1), (1, 1))


def test_constrained_examples():
    assert constrained_dominates(ind((9, 9), 0.0), ind((0, 0), 0.3))
    assert constrained_dominates(ind((9, 9), 0.1), ind((0, 0), 0.2))
    assert not constrained_dominates(ind((1, 2)), ind((2, 1)))


def test_constrained_dominance_order_properties(rng):
    for feasible_share in (1.0, 0.0):
        for _ in range(300):
            a, b, c = random_population(rng, 3, 2, feasible_share, levels=3)
            assert not constrained_dominates(a, a)
            assert not (constrained_dominates(a, b) and constrained_dominates(b, a))
            if constrained_dominates(a, b) and constrained_dominates(b, c):
                assert constrained_dominates(a, c)


def test_sort_examples():
    assert nondominated_sort([ind((1, 3)), ind((2, 2)), ind((3, 1))]) == [[0, 1, 2]]
    assert nondominated_sort([ind((1, 1)), ind((2, 2))]) == [[0], [1]]
    assert nondominated_sort([]) == []


def test_sort_matches_pairwise_oracle(rng):
    for trial in range(30):
        pop = random_population(rng, int(rng.integers(1, 80)), int(rng.integers(2, 5)), levels=4 if trial % 2 else None)
        assert nondominated_sort(pop) == fronts_oracle(pop)


def test_front_zero_is_maximal_set(rng):
    pop = random_population(rng, 300, 3, levels=6)
    front0 = set(nondominated_sort(pop)[0])
    maximal = {i for i in range(len(pop)) if not any(constrained_dominates(q, pop[i]) for q in pop)}
    assert front0 == maximal


# -- crowding distance --------------------------------------------------------------

def test_crowding_examples():
    assert np.all(np.isinf(crowding_distance([[0, 0], [1, 1]])))
    cd = crowding_distance([[0.0, 5.0], [0.5, 5.0], [1.0, 5.0]])
    assert np.isinf(cd[0]) and np.isinf(cd[2])
    assert cd[1] == pytest.approx(1.0)


# -- hypervolume ---------------------------------------------------------------

def test_hv_three_point_example_is_exact():
    assert hypervolume_exact([(1, 3), (2, 2), (3, 1)], (4, 4)) == 6.0


def test_hv_trivial_cases():
    assert hypervolume_exact([(1.0, 2.0, 0.5)], (3.0, 3.0, 3.0)) == pytest.approx(2.0 * 1.0 * 2.5)
    assert hypervolume_exact([], (1, 1)) == 0.0
    assert hypervolume_exact([(5, 5)], (4, 4)) == 0.0


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_hv_matches_grid_oracle(m, rng):
    for _ in range(8):
        P = rng.integers(0, 5, (int(rng.integers(1, 9)), m)).astype(float)
        ref = np.full(m, 5.0)
        assert hypervolume_exact(P, ref) == pytest.approx(hv_grid_oracle(P, ref), abs=1e-9)


def test_hv_running_reference_normalizes():
    F = np.array([[0.0, 10.0], [10.0, 0.0]])
    ref = HvReference.running(F, 0.1)
    assert np.allclose(ref.nadir, [11.0, 11.0]) and np.allclose(ref.ideal, [0.0, 0.0])
    assert hypervolume_exact(F, ref) == pytest.approx(hv_grid_oracle(ref.normalize(F), [1.0, 1.0]))


def test_hv_rejects_many_objectives():
    with pytest.raises(ValueError, match="hypervolume_mc"):
        hypervolume_exact(np.zeros((2, 9)), np.ones(9))


@settings(max_examples=150, deadline=None)
@given(points_2d3d, st.data())
def test_hv_monotone_and_permutation_invariant(points, data):
    m = len(points[0]) if points else 2
    ref = np.full(m, 7.0)
    base = hypervolume_exact(points, ref) if points else 0.0
    extra = data.draw(st.lists(st.integers(0, 6), min_size=m, max_size=m))
    grown = hypervolume_exact(points + [extra], ref)
    assert grown >= base - 1e-12
    if points:
        perm = data.draw(st.permutations(range(len(points))))
        axes = data.draw(st.permutations(range(m)))
        shuffled = [[points[i][a] for a in axes] for i in perm]
        assert hypervolume_exact(shuffled, ref[list(axes)]) == pytest.approx(base, abs=1e-9)
        # a point strictly dominating every member adds volume
        better = np.min(np.asarray(points, dtype=float), axis=0) - 0.5
        assert hypervolume_exact(points + [better.tolist()], ref) > base


@settings(max_examples=100, deadline=None)
@given(points_2d3d.filter(lambda p: len(p) > 0), st.integers(0, 3))
def test_hv_dominance_consistency(points, shift):
    # B is A moved away from the ideal: every b is weakly dominated by its a
    A = np.asarray(points, dtype=float)
    B = A + shift
    ref = np.full(A.shape[1], 10.0)
    assert hypervolume_exact(A, ref) >= hypervolume_exact(B, ref)


def test_mc_matches_exact(rng):
    pts = [(1, 3), (2, 2), (3, 1)]
    mc = hypervolume_mc(pts, (4, 4), 1_000_000, make_rng(0))
    assert mc == pytest.approx(6.0, rel=0.01)
    assert hypervolume_mc([], (4, 4), 10, make_rng(0)) == 0.0


def test_mc_half_box_within_binomial_bound():
    # box [0,1]^2 sampled from the point's lower corner: point (0.5, 0) fills half of [0,1]x[0,1]
    n = 200_000
    est = hypervolume_mc([(0.0, 0.0), (0.5, 0.0)], (1.0, 1.0), n, make_rng(3))
    assert est == pytest.approx(1.0)
    est = hypervolume_mc([(0.5, 0.0), (0.0, 0.5)], (1.0, 1.0), n, make_rng(3))
    # exact 0.75 over a unit box: 3 sigma of the binomial estimate
    assert abs(est - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / n)


# -- contributions and greedy ----------------------------------------------------------

def test_contribution_examples():
    assert hv_contribution((1, 3), [(2, 2)], (4, 4)) == pytest.approx(1.0)
    assert hv_contribution((3, 3), [(2, 2)], (4, 4)) == 0.0
    assert hv_contribution((1, 3), [], (4, 4)) == pytest.approx(3.0)


def test_contributions_match_hv_difference(rng):
    for m in (2, 3, 4):
        for _ in range(10):
            base = rng.integers(0, 6, (6, m)).astype(float)
            P = rng.integers(0, 6, (4, m)).astype(float)
            ref = np.full(m, 6.0)
            expected = [hypervolume_exact(np.vstack([base, p]), ref) - hypervolume_exact(base, ref) for p in P]
            assert np.allclose(hv_contributions(P, base, ref), expected)
            excl = exclusive_contributions(base, ref)
            full = hypervolume_exact(base, ref)
            assert np.allclose(excl, [full - hypervolume_exact(np.delete(base, i, 0), ref) for i in range(len(base))])


def test_greedy_matches_naive_and_brute_force(rng):
    for m in (2, 3):
        for _ in range(10):
            n = int(rng.integers(3, 12))
            P = rng.random((n, m))
            base = rng.random((3, m)) + 0.3
            ref = np.full(m, 1.5)
            picks = greedy_hv_subset(P, base, 3, ref)
            assert picks == naive_greedy(P, base, 3, ref)
            # first pick is the best single contributor, by enumeration
            singles = [hypervolume_exact(np.vstack([base, P[i]]), ref) for i in range(n)]
            assert picks[0] == int(np.argmax(singles))


def test_greedy_tie_goes_to_lower_index():
    assert greedy_hv_subset([(1, 1), (1, 1), (0.5, 2)], [], 1, (3, 3)) == [0]


# -- distribution metric ------------------------------------------------------------

def test_dm_examples():
    ref = HvReference(np.ones(1), np.zeros(1), np.ones(1))
    assert distribution_metric([[0.3], [0.3], [0.3]], ref) == 0.0
    assert distribution_metric([[0.3]], ref) == 0.0
    uniform = distribution_metric([[0.0], [0.5], [1.0]], ref)
    skewed = distribution_metric([[0.0], [0.1], [1.0]], ref)
    assert uniform == pytest.approx(1.0)
    assert uniform > skewed


def test_dm_grows_with_spread():
    ref = HvReference(np.ones(2), np.zeros(2), np.ones(2))
    narrow = distribution_metric([[0.4, 0.6], [0.5, 0.5], [0.6, 0.4]], ref)
    wide = distribution_metric([[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]], ref)
    assert wide > narrow


def test_cv_dm_pick_prefers_low_cv_then_dm_gain():
    ref = HvReference(np.ones(1), np.zeros(1), np.ones(1))
    selected = np.array([[0.0], [1.0]])
    cands = np.array([[0.9], [0.5], [0.1]])
    assert pick_by_cv_dm([0.3, 0.1, 0.2], cands, selected, ref) == 1
    # equal CV: the candidate that keeps gaps uniform wins
    assert pick_by_cv_dm([0.1, 0.1, 0.1], cands, selected, ref) == 1


def test_nondominated_mask_keeps_first_duplicate():
    mask = nondominated_mask(np.array([[1.0, 1.0], [1.0, 1.0], [0.5, 2.0], [2.0, 2.0]]))
    assert mask.tolist() == [True, False, True, False]
