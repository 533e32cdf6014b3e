"""Domain types, problem validation, design repair and corner aggregation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

import numpy as np


class ProblemError(ValueError):
    """Raised when a problem definition violates an invariant.

    The message starts with the offending field path, e.g.
    ``variables[0]: degenerate bound``.
    """


class VariableKind(str, Enum):
    REAL = "Real"
    INTEGER = "Integer"


class Direction(str, Enum):
    MINIMIZE = "Minimize"
    MAXIMIZE = "Maximize"


class Source(str, Enum):
    SIMULATED = "Simulated"
    SURROGATE = "Surrogate"


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: VariableKind
    lower: float
    upper: float


@dataclass(frozen=True)
class ResponseSpec:
    name: str
    direction: Direction
    constraint_bound: Optional[float] = None
    is_objective: bool = False

    @property
    def is_constraint(self) -> bool:
        return self.constraint_bound is not None


@dataclass(frozen=True)
class Corner:
    id: str
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    variables: tuple
    responses: tuple
    corners: tuple

    def __post_init__(self):
        for attr in ("variables", "responses", "corners"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_responses(self) -> int:
        return len(self.responses)

    @property
    def n_corners(self) -> int:
        return len(self.corners)

    @property
    def objective_indices(self) -> list:
        return [k for k, r in enumerate(self.responses) if r.is_objective]

    @property
    def n_objectives(self) -> int:
        return len(self.objective_indices)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    @property
    def integer_mask(self) -> np.ndarray:
        return np.array([v.kind is VariableKind.INTEGER for v in self.variables])

    @property
    def shifts(self) -> np.ndarray:
        """Corner shift vectors stacked as a ``(C, S)`` array."""
        return np.array([c.shift for c in self.corners], dtype=float).reshape(
            self.n_corners, -1
        )


@dataclass(frozen=True)
class Evaluation:
    """Responses of one design on every corner, shape ``(R, C)``.

    Surrogate evaluations also carry ``std``, the predictive standard
    deviation of each entry.
    """

    responses: np.ndarray
    source: Source = Source.SIMULATED
    std: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Individual:
    design: np.ndarray
    evaluation: Optional[Evaluation] = None
    cv: Optional[float] = None
    objectives: Optional[np.ndarray] = None

    @property
    def evaluated(self) -> bool:
        return self.evaluation is not None

    @property
    def feasible(self) -> bool:
        return self.cv == 0.0


@dataclass(frozen=True)
class AlgoConfig:
    """Tunable parameters shared by every algorithm.

    ``replace_quota=None`` means ``pop_size // 4``.
    """

    pop_size: int = 100
    F: float = 0.5
    CR: float = 0.9
    K: float = 2.0
    offspring_multiplier: int = 10
    replace_quota: Optional[int] = None
    budget: int = 15000
    batch_size: int = 50
    max_pop: int = 50
    hv_fraction: float = 0.5
    gp_train_cap: int = 2000
    gp_hyper_subsample: int = 200
    gp_warm_start: bool = True
    hv_margin: float = 0.1
    minutes_per_sim: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4:
            raise ValueError("pop_size must be at least 4 for DE/rand/1")
        if not 0.0 < self.CR <= 1.0:
            raise ValueError("CR must lie in (0, 1]")
        if not self.F > 0.0:
            raise ValueError("F must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.offspring_multiplier < 1:
            raise ValueError("offspring_multiplier must be >= 1")
        if self.quota > self.pop_size or self.quota < 0:
            raise ValueError("replace_quota must lie in [0, pop_size]")
        if not 0.0 <= self.hv_fraction <= 1.0:
            raise ValueError("hv_fraction must lie in [0, 1]")
        if self.max_pop < 1 or self.gp_train_cap < 2:
            raise ValueError("max_pop and gp_train_cap must be positive")
        if self.K < 0:
            raise ValueError("K must be non-negative")

    @property
    def quota(self) -> int:
        return self.pop_size // 4 if self.replace_quota is None else self.replace_quota

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AlgoConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**data)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; every stochastic draw goes through it."""
    return np.random.Generator(np.random.Philox(seed))


def validate_problem(spec: ProblemSpec) -> ProblemSpec:
    """Check every invariant of ``spec`` and return it unchanged.

    Raises
    ------
    ProblemError
        On the first violated invariant, prefixed with its field path.
    """
    if not spec.name:
        raise ProblemError("name: empty problem name")
    if len(spec.variables) < 1:
        raise ProblemError("variables: at least one variable required")
    for j, v in enumerate(spec.variables):
        path = f"variables[{j}]"
        if not isinstance(v.kind, VariableKind):
            raise ProblemError(f"{path}.kind: unknown variable kind {v.kind!r}")
        if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
            raise ProblemError(f"{path}: non-finite bound")
        if v.lower == v.upper:
            raise ProblemError(f"{path}: degenerate bound")
        if v.lower > v.upper:
            raise ProblemError(f"{path}: lower bound exceeds upper bound")
        if v.kind is VariableKind.INTEGER and not (
            float(v.lower).is_integer() and float(v.upper).is_integer()
        ):
            raise ProblemError(f"{path}: integer variable needs whole-number bounds")
    if len({v.name for v in spec.variables}) != len(spec.variables):
        raise ProblemError("variables: duplicate variable name")
    for k, r in enumerate(spec.responses):
        path = f"responses[{k}]"
        if not isinstance(r.direction, Direction):
            raise ProblemError(f"{path}.direction: unknown direction {r.direction!r}")
        if r.constraint_bound is None and not r.is_objective:
            raise ProblemError(f"{path}: response is neither constrained nor an objective")
        if r.constraint_bound is not None and not math.isfinite(r.constraint_bound):
            raise ProblemError(f"{path}.constraint_bound: non-finite bound")
    if spec.n_objectives < 2:
        raise ProblemError("responses: at least two objectives required")
    if len(spec.corners) < 1:
        raise ProblemError("corners: at least one corner required")
    width = len(spec.corners[0].shift)
    ids = set()
    for c, corner in enumerate(spec.corners):
        path = f"corners[{c}]"
        if corner.id in ids:
            raise ProblemError(f"{path}.id: duplicate corner id {corner.id!r}")
        ids.add(corner.id)
        if len(corner.shift) != width:
            raise ProblemError(f"{path}.shift: length differs from corners[0]")
        if not all(math.isfinite(s) for s in corner.shift):
            raise ProblemError(f"{path}.shift: non-finite entry")
    return spec


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def repair_design(values, spec: ProblemSpec) -> np.ndarray:
    """Clamp into the bound box, then round integer coordinates.

    Rounding is half-away-from-zero and happens after clamping, so an
    integer variable never leaves its bounds.
    """
    x = np.array(values, dtype=float)
    if x.shape != (spec.n_variables,):
        raise ValueError(f"expected {spec.n_variables} values, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("design has non-finite coordinates")
    x = np.clip(x, spec.lower, spec.upper)
    mask = spec.integer_mask
    x[mask] = round_half_away(x[mask])
    return x


def worst_case(responses: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Per-response worst value across corners (max if minimized, min if maximized)."""
    responses = np.asarray(responses, dtype=float)
    maximize = np.array([r.direction is Direction.MAXIMIZE for r in spec.responses])
    return np.where(maximize, responses.min(axis=1), responses.max(axis=1))


def aggregate_worst_case(evaluation, spec: ProblemSpec):
    """Return ``(objectives, per_response_worst)`` for one evaluation.

    Objectives are in minimization convention: maximized responses are negated.
    """
    responses = evaluation.responses if isinstance(evaluation, Evaluation) else evaluation
    worst = worst_case(responses, spec)
    idx = spec.objective_indices
    sign = np.array(
        [-1.0 if spec.responses[k].direction is Direction.MAXIMIZE else 1.0 for k in idx]
    )
    return sign * worst[idx], worst


# -- JSON problem files ------------------------------------------------------

def _schema() -> dict:
    text = resources.files("modebi").joinpath("data/problem.schema.json").read_text()
    return json.loads(text)


def problem_from_dict(data: dict) -> ProblemSpec:
    """Build and validate a :class:`ProblemSpec` from its JSON form."""
    import jsonschema

    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemError(f"{path}: {exc.message}") from None
    spec = ProblemSpec(
        name=data["name"],
        variables=[
            VariableSpec(v["name"], VariableKind(v["kind"]), float(v["lower"]), float(v["upper"]))
            for v in data["variables"]
        ],
        responses=[
            ResponseSpec(
                r["name"],
                Direction(r["direction"]),
                None if r.get("constraint_bound") is None else float(r["constraint_bound"]),
                bool(r.get("is_objective", False)),
            )
            for r in data["responses"]
        ],
        corners=[Corner(c["id"], c["shift"]) for c in data["corners"]],
    )
    return validate_problem(spec)


def problem_to_dict(spec: ProblemSpec) -> dict:
    return {
        "name": spec.name,
        "variables": [
            {"name": v.name, "kind": v.kind.value, "lower": v.lower, "upper": v.upper}
            for v in spec.variables
        ],
        "responses": [
            {
                "name": r.name,
                "direction": r.direction.value,
                "constraint_bound": r.constraint_bound,
                "is_objective": r.is_objective,
            }
            for r in spec.responses
        ],
        "corners": [{"id": c.id, "shift": list(c.shift)} for c in spec.corners],
    }


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        data = json.load(fh)
    return problem_from_dict(data)


def objectives_matrix(individuals: Sequence[Individual]) -> np.ndarray:
    if not individuals:
        return np.empty((0, 0))
    return np.array([ind.objectives for ind in individuals], dtype=float)


def cv_vector(individuals: Sequence[Individual]) -> np.ndarray:
    return np.array([ind.cv for ind in individuals], dtype=float)
