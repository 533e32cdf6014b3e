import numpy as np
import pytest

from modebi.core import (
    Corner,
    Direction,
    Evaluation,
    Individual,
    ProblemSpec,
    ResponseSpec,
    VariableKind,
    VariableSpec,
)


def ind(objectives, cv=0.0, design=None):
    """Bare individual with given objectives and CV (no evaluation)."""
    objectives = np.asarray(objectives, dtype=float)
    design = np.zeros(1) if design is None else np.asarray(design, dtype=float)
    return Individual(design, Evaluation(np.zeros((1, 1))), float(cv), objectives)


def random_population(rng, n, m, feasible_share=0.5, levels=None):
    """Individuals with random objectives and mixed feasibility.

    ``levels`` quantizes objectives and CVs so ties and duplicates occur.
    """
    if levels:
        F = rng.integers(0, levels, (n, m)).astype(float)
        cv = np.where(rng.random(n) < feasible_share, 0.0, rng.integers(1, levels + 1, n) / levels)
    else:
        F = rng.random((n, m))
        cv = np.where(rng.random(n) < feasible_share, 0.0, rng.random(n) + 1e-3)
    return [ind(f, c) for f, c in zip(F, cv)]


def make_small_spec():
    return ProblemSpec(
        name="small",
        variables=[
            VariableSpec("a", VariableKind.REAL, 0.0, 5.0),
            VariableSpec("n", VariableKind.INTEGER, 1.0, 10.0),
        ],
        responses=[
            ResponseSpec("f1", Direction.MINIMIZE, None, True),
            ResponseSpec("f2", Direction.MAXIMIZE, 60.0, True),
            ResponseSpec("g", Direction.MINIMIZE, 5.0, False),
        ],
        corners=[Corner("c0", (0.0,)), Corner("c1", (1.0,)), Corner("c2", (-1.0,))],
    )


@pytest.fixture
def small_spec():
    return make_small_spec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion; returns ``ok``."""
    def report(number, title, ok, detail=""):
        status = "PASS" if ok is True else ("FLAGGED" if ok is None else "FAIL")
        line = f"criterion {number:>2} [{status}] {title}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
