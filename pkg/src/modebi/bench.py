"""Synthetic constrained multi-objective problems with corner perturbations.

Evaluators are vectorized over leading axes: they take designs shaped
``(..., D)`` and a corner shift vector and return responses ``(..., R)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    Corner,
    Direction,
    ProblemError,
    ProblemSpec,
    ResponseSpec,
    VariableKind,
    VariableSpec,
    load_problem,
    validate_problem,
)
from .metrics import hypervolume_exact

# Dense-grid HV of the bnh feasible front, 500 points per axis, nominal
# corner, reference point (140, 55). Regenerate with scripts/pin_reference_hv.py.
BNH_REFERENCE_HV = 5984.388673455223
BNH_REFERENCE_RESOLUTION = 500
BNH_REF_POINT = (140.0, 55.0)


@dataclass(frozen=True)
class BenchProblem:
    spec: ProblemSpec
    evaluator: Callable
    reference_hv: Optional[float] = None
    reference_note: str = ""
    hv_ref_point: Optional[tuple] = None

    def evaluate(self, design, corner: Corner) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(design, dtype=float), np.asarray(corner.shift)))

    def evaluate_many(self, designs, corner: Corner) -> np.ndarray:
        return np.asarray(self.evaluator(np.atleast_2d(np.asarray(designs, dtype=float)),
                                         np.asarray(corner.shift)))


# -- bnh -------------------------------------------------------------------------

def bnh_responses(X, shift):
    X = np.asarray(X, dtype=float)
    x = X[..., 0] + shift[0]
    y = X[..., 1]
    f1 = 4.0 * x ** 2 + 4.0 * y ** 2
    f2 = (x - 5.0) ** 2 + (y - 5.0) ** 2
    g1 = (x - 5.0) ** 2 + y ** 2
    g2 = (x - 8.0) ** 2 + (y + 3.0) ** 2
    return np.stack([f1, f2, g1, g2], axis=-1)


def bnh_spec(corners: int = 1) -> ProblemSpec:
    if corners < 1:
        raise ValueError("corners must be >= 1")
    return validate_problem(ProblemSpec(
        name="bnh",
        variables=[
            VariableSpec("x", VariableKind.REAL, 0.0, 5.0),
            VariableSpec("y", VariableKind.REAL, 0.0, 3.0),
        ],
        responses=[
            ResponseSpec("f1", Direction.MINIMIZE, None, True),
            ResponseSpec("f2", Direction.MINIMIZE, None, True),
            ResponseSpec("g1", Direction.MINIMIZE, 25.0, False),
            ResponseSpec("g2", Direction.MAXIMIZE, 7.7, False),
        ],
        corners=[Corner(f"c{k}", (0.05 * (k - (corners - 1) / 2.0),)) for k in range(corners)],
    ))


def bnh(corners: int = 1) -> BenchProblem:
    """Two-objective, two-constraint testbed; corner ``k`` shifts ``x`` by
    ``0.05 * (k - (C - 1) / 2)``."""
    return BenchProblem(
        spec=bnh_spec(corners),
        evaluator=bnh_responses,
        reference_hv=BNH_REFERENCE_HV,
        reference_note=f"dense grid {BNH_REFERENCE_RESOLUTION}x{BNH_REFERENCE_RESOLUTION}, "
                       f"nominal corner, ref {BNH_REF_POINT}",
        hv_ref_point=BNH_REF_POINT,
    )


# -- toy regulator ----------------------------------------------------------------

TOY_CENTERS = np.array([
    [0.25, 0.30, 0.55, 0.70, 0.40, 0.60],
    [0.70, 0.25, 0.40, 0.35, 0.65, 0.45],
    [0.40, 0.75, 0.30, 0.50, 0.25, 0.70],
    [0.55, 0.50, 0.75, 0.25, 0.70, 0.30],
])
TOY_ALPHA = np.array([0.20, 0.80, 0.50, 0.35])
# (process, voltage, temperature) offsets
TOY_CORNERS = (
    ("tt", (0.0, 0.0, 0.0)),
    ("ff_hv_cold", (1.0, 1.0, -1.0)),
    ("ff_lv_hot", (1.0, -1.0, 1.0)),
    ("ss_hv_cold", (-1.0, 1.0, -1.0)),
    ("ss_lv_hot", (-1.0, -1.0, 1.0)),
    ("ff_hv_hot", (1.0, 1.0, 1.0)),
    ("ss_lv_cold", (-1.0, -1.0, -1.0)),
    ("tt_lv_hot", (0.0, -1.0, 1.0)),
    ("tt_hv_cold", (0.0, 1.0, -1.0)),
    ("ff_nom", (1.0, 0.0, 0.0)),
)


def toy_regulator_responses(X, shift):
    X = np.asarray(X, dtype=float)
    u = X[..., :6]
    a = (X[..., 6] - 1.0) / 7.0
    b = (X[..., 7] - 1.0) / 7.0
    p, v, t = shift
    out = []
    for k in range(4):
        d2 = ((u - TOY_CENTERS[k]) ** 2).sum(axis=-1)
        out.append(
            60.0 - 45.0 * d2
            + 6.0 * np.exp(-4.0 * (a - TOY_ALPHA[k]) ** 2)
            + 2.5 * b * (1.0 - u[..., k])
            - 1.2 * t * (0.5 + u[..., k + 1])
            - 0.8 * p * (u[..., (k + 2) % 6] - 0.4)
            - 0.6 * v * v
        )
    iq = 1.0 + 1.6 * u[..., 0] * (0.5 + a) + 1.2 * b * u[..., 5] + 0.35 * np.exp(0.7 * t) + 0.15 * v
    area = 0.8 + 0.55 * (u[..., 2] + u[..., 3]) ** 2 + 0.5 * a + 0.7 * b + 0.05 * p
    return np.stack(out + [iq, area], axis=-1)


def toy_regulator_spec(psrr_bound=44.0, iq_bound=2.8, area_bound=2.0) -> ProblemSpec:
    variables = [VariableSpec(f"w{j}", VariableKind.REAL, 0.0, 1.0) for j in range(6)]
    variables += [VariableSpec(f"m{j}", VariableKind.INTEGER, 1.0, 8.0) for j in range(2)]
    responses = [ResponseSpec(f"psrr{k}", Direction.MAXIMIZE, psrr_bound, True) for k in range(4)]
    responses += [
        ResponseSpec("iq", Direction.MINIMIZE, iq_bound, False),
        ResponseSpec("area", Direction.MINIMIZE, area_bound, False),
    ]
    corners = [Corner(cid, shift) for cid, shift in TOY_CORNERS]
    return validate_problem(ProblemSpec("toy-regulator", variables, responses, corners))


def toy_regulator(config: Optional[dict] = None) -> BenchProblem:
    """Eight-variable, six-response, ten-corner stand-in for a regulator.

    ``config`` may override ``psrr_bound``, ``iq_bound`` and ``area_bound``.
    Formulas are listed in ``docs/benchmarks.md``.
    """
    return BenchProblem(toy_regulator_spec(**(config or {})), toy_regulator_responses)


PROBLEMS = {"bnh": bnh, "toy-regulator": toy_regulator}


def get_problem(name: str, **kwargs) -> BenchProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**kwargs)


def problem_from_file(path) -> BenchProblem:
    """Load a problem file; its ``name`` selects the benchmark evaluator."""
    spec = load_problem(path)
    base = get_problem(spec.name)
    probe = base.spec
    if spec.n_variables != probe.n_variables or spec.n_responses != probe.n_responses:
        raise ProblemError(
            f"name: {spec.name!r} evaluator needs {probe.n_variables} variables "
            f"and {probe.n_responses} responses"
        )
    if len(spec.corners[0].shift) != len(probe.corners[0].shift):
        raise ProblemError(f"corners[0].shift: {spec.name!r} expects length {len(probe.corners[0].shift)}")
    return BenchProblem(spec, base.evaluator, None, "", base.hv_ref_point)


def reference_front_hv(problem: BenchProblem, grid_resolution: int, ref_point=None) -> float:
    """HV of the feasible nondominated set found on a dense design grid.

    Evaluated at the nominal (zero-shift) corner. Only for ``D <= 3``.
    """
    spec = problem.spec
    if spec.n_variables > 3:
        raise ValueError("grid mode supports at most 3 design variables")
    ref = ref_point if ref_point is not None else problem.hv_ref_point
    if ref is None:
        raise ValueError("no reference point given")
    axes = []
    for v in spec.variables:
        if v.kind is VariableKind.INTEGER:
            axes.append(np.arange(v.lower, v.upper + 1))
        else:
            axes.append(np.linspace(v.lower, v.upper, grid_resolution))
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.n_variables)
    R = problem.evaluator(X, np.zeros(len(spec.corners[0].shift)))
    feasible = np.ones(len(X), dtype=bool)
    for k, r in enumerate(spec.responses):
        if r.constraint_bound is None:
            continue
        if r.direction is Direction.MAXIMIZE:
            feasible &= R[:, k] >= r.constraint_bound
        else:
            feasible &= R[:, k] <= r.constraint_bound
    if not feasible.any():
        return 0.0
    idx = spec.objective_indices
    sign = np.array([-1.0 if spec.responses[k].direction is Direction.MAXIMIZE else 1.0 for k in idx])
    F = R[feasible][:, idx] * sign
    return hypervolume_exact(F, ref)
