"""Experiment driver: single runs and multi-seed campaigns with on-disk artifacts.

Every run directory holds

``runlog.csv``
    one row per epoch, columns ``RUNLOG_COLUMNS``.
``population.json``
    final population: design, responses (``R x C``), CV and objectives.
``summary.json``
    first-feasible simulation count (``"inf"`` if never feasible) and final HV.
``metadata.json`` / ``timing.csv``
    wall-clock data; the only files that differ between identical runs.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import platform
import statistics
import time
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .core import AlgoConfig
from .estimators import make_optimizer

SUMMARY_KEYS = (
    "algorithm", "problem", "seed", "config_hash", "budget", "sims_used", "init_cost",
    "epochs", "partial_epochs", "first_feasible_sims", "feasible_count", "final_hv",
    "final_hv_fixed_ref", "best_cv", "sim_minutes",
)
CAMPAIGN_KEYS = (
    "algorithm", "problem", "config_hash", "seeds",
    "first_feasible_median", "first_feasible_min", "first_feasible_max", "feasible_runs",
    "final_hv_median", "final_hv_min", "final_hv_max",
)


def _num(value):
    """JSON form of a count that may be infinite."""
    if value is None:
        return None
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def ensure_writable(out: Path) -> Path:
    """Create ``out`` and prove a file can be written there (raises ``OSError``)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    probe.write_text("")
    probe.unlink()
    return out


def population_record(population, spec) -> dict:
    return {
        "variables": [v.name for v in spec.variables],
        "responses": [r.name for r in spec.responses],
        "corners": [c.id for c in spec.corners],
        "members": [
            {
                "design": [float(x) for x in ind.design],
                "responses": np.asarray(ind.evaluation.responses, dtype=float).tolist(),
                "cv": float(ind.cv),
                "objectives": [float(f) for f in ind.objectives],
            }
            for ind in population
        ],
    }


def summarize(optimizer, problem) -> dict:
    log = optimizer.runlog_
    last = log.rows[-1]
    fixed = None
    if problem.hv_ref_point is not None:
        fixed = float(optimizer.final_hv(problem.hv_ref_point))
    first = optimizer.first_feasible_
    return {
        "algorithm": log.algorithm,
        "problem": log.problem,
        "seed": log.seed,
        "config_hash": log.config_hash,
        "budget": optimizer.budget,
        "sims_used": optimizer.n_sims_,
        "init_cost": optimizer.pop_size * problem.spec.n_corners,
        "epochs": last.epoch,
        "partial_epochs": optimizer.partial_epochs_,
        "first_feasible_sims": "inf" if first is None else first,
        "feasible_count": last.feasible_count,
        "final_hv": last.population_hv,
        "final_hv_fixed_ref": fixed,
        "best_cv": last.best_so_far_cv,
        "sim_minutes": last.sim_minutes,
    }


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def write_run(optimizer, problem, out: Path, metadata: Optional[dict] = None) -> dict:
    """Write every artifact of a fitted optimizer to ``out``; return the summary."""
    out = ensure_writable(out)
    summary = summarize(optimizer, problem)
    (out / "runlog.csv").write_text(optimizer.runlog_.to_csv())
    _dump(out / "population.json", population_record(optimizer.population_, problem.spec))
    _dump(out / "summary.json", summary)
    (out / "timing.csv").write_text(optimizer.runlog_.timing_csv())
    if metadata is not None:
        _dump(out / "metadata.json", metadata)
    return summary


def run(problem, algorithm: str, config: AlgoConfig, out=None, workers: int = 1):
    """Run ``algorithm`` on ``problem`` to budget exhaustion.

    Returns ``(optimizer, summary)``; artifacts go to ``out`` when given.
    Raises ``ValueError`` for an unknown algorithm and
    :class:`~modebi.simulation.BudgetError` when the budget cannot pay for
    the initial population.
    """
    optimizer = make_optimizer(algorithm, config, workers=workers)
    if out is not None:
        ensure_writable(out)
    started = _dt.datetime.now(_dt.timezone.utc)
    tic = time.perf_counter()
    optimizer.fit(problem)
    metadata = {
        "started_at": started.isoformat(),
        "wall_seconds": time.perf_counter() - tic,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pid": os.getpid(),
    }
    if out is None:
        return optimizer, summarize(optimizer, problem)
    return optimizer, write_run(optimizer, problem, out, metadata)


def median_with_inf(values: Iterable[float]) -> float:
    """Median where never-feasible runs count as ``+inf``."""
    return statistics.median(float(v) for v in values)


def _as_float(value) -> float:
    return math.inf if value == "inf" else float(value)


def aggregate(summaries: list) -> dict:
    """Cross-seed median / min / max of first-feasible counts and final HV."""
    if not summaries:
        raise ValueError("no runs to aggregate")
    first = [_as_float(s["first_feasible_sims"]) for s in summaries]
    hv = [0.0 if s["final_hv"] is None else float(s["final_hv"]) for s in summaries]
    return {
        "algorithm": summaries[0]["algorithm"],
        "problem": summaries[0]["problem"],
        "config_hash": summaries[0]["config_hash"],
        "seeds": [s["seed"] for s in summaries],
        "first_feasible_median": _num(median_with_inf(first)),
        "first_feasible_min": _num(min(first)),
        "first_feasible_max": _num(max(first)),
        "feasible_runs": sum(1 for f in first if not math.isinf(f)),
        "final_hv_median": statistics.median(hv),
        "final_hv_min": min(hv),
        "final_hv_max": max(hv),
    }


def campaign(problem, algorithm: str, config: AlgoConfig, seeds, out=None, workers: int = 1):
    """One run per seed plus a cross-seed summary.

    Per-seed artifacts go to ``out/seed-<s>/`` and the summary to
    ``out/campaign.json`` and ``out/campaign.csv`` (one row per seed).
    Returns ``(optimizers, per_seed_summaries, summary)``.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds list must not be empty")
    if out is not None:
        out = ensure_writable(out)
    optimizers, summaries = [], []
    for seed in seeds:
        cfg = AlgoConfig.from_dict({**config.to_dict(), "seed": int(seed)})
        target = None if out is None else out / f"seed-{seed}"
        opt, summary = run(problem, algorithm, cfg, target, workers)
        optimizers.append(opt)
        summaries.append(summary)
    table = aggregate(summaries)
    if out is not None:
        _dump(out / "campaign.json", table)
        rows = ["seed,first_feasible_sims,final_hv,sims_used"]
        for s in summaries:
            hv = "" if s["final_hv"] is None else repr(float(s["final_hv"]))
            rows.append(f"{s['seed']},{s['first_feasible_sims']},{hv},{s['sims_used']}")
        (out / "campaign.csv").write_text("\n".join(rows) + "\n")
    return optimizers, summaries, table
