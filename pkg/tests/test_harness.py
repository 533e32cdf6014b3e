import csv
import json
import math

import pytest
from sklearn.base import clone

from modebi.bench import bnh
from modebi.core import AlgoConfig
from modebi.estimators import ALGORITHMS, GDE3, MODEBI, make_optimizer
from modebi.harness import CAMPAIGN_KEYS, SUMMARY_KEYS, aggregate, campaign, median_with_inf, run
from modebi.simulation import RUNLOG_COLUMNS, BudgetError

SMALL = AlgoConfig(pop_size=8, budget=120, seed=1, offspring_multiplier=3)


def test_median_with_infinity():
    assert median_with_inf([3700, 4100, math.inf]) == 4100
    assert median_with_inf([math.inf, math.inf, 10]) == math.inf


def test_run_writes_every_artifact(tmp_path):
    opt, summary = run(bnh(), "modebi-s2", SMALL, tmp_path / "out")
    out = tmp_path / "out"
    for name in ("runlog.csv", "population.json", "summary.json", "timing.csv", "metadata.json"):
        assert (out / name).is_file()
    assert tuple(json.loads((out / "summary.json").read_text())) == SUMMARY_KEYS
    rows = list(csv.reader((out / "runlog.csv").open()))
    assert tuple(rows[0]) == RUNLOG_COLUMNS and len(rows) == len(opt.runlog_.rows) + 1
    pop = json.loads((out / "population.json").read_text())
    assert len(pop["members"]) == 8 and pop["corners"] == ["c0"]
    member = pop["members"][0]
    assert len(member["responses"]) == 4 and len(member["responses"][0]) == 1
    assert summary["sims_used"] == 120 and summary["init_cost"] == 8


def test_summary_reports_inf_when_never_feasible(tmp_path):
    from modebi.bench import toy_regulator
    _, summary = run(toy_regulator(), "gde3", AlgoConfig(pop_size=4, budget=40, seed=0), tmp_path)
    assert summary["first_feasible_sims"] == "inf"
    assert summary["final_hv"] is None
    saved = json.loads((tmp_path / "summary.json").read_text())
    assert saved["first_feasible_sims"] == "inf"


def test_run_is_byte_reproducible(tmp_path):
    run(bnh(2), "modebi-s1", SMALL, tmp_path / "a")
    run(bnh(2), "modebi-s1", SMALL, tmp_path / "b")
    for name in ("runlog.csv", "population.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_errors():
    with pytest.raises(ValueError, match="unknown algorithm"):
        run(bnh(), "nsga2", SMALL)
    with pytest.raises(BudgetError, match="initialization cost"):
        run(bnh(3), "gde3", AlgoConfig(pop_size=8, budget=20))


def test_campaign_shapes(tmp_path):
    opts, summaries, table = campaign(bnh(), "gde3", SMALL, [0, 1, 2], tmp_path)
    assert len(opts) == 3 and [s["seed"] for s in summaries] == [0, 1, 2]
    assert tuple(table) == CAMPAIGN_KEYS and table["seeds"] == [0, 1, 2]
    for s in (0, 1, 2):
        assert (tmp_path / f"seed-{s}" / "runlog.csv").is_file()
    assert json.loads((tmp_path / "campaign.json").read_text()) == table
    assert len((tmp_path / "campaign.csv").read_text().splitlines()) == 4
    with pytest.raises(ValueError):
        campaign(bnh(), "gde3", SMALL, [])


def test_campaign_repeated_seed_gives_identical_logs():
    opts, _, _ = campaign(bnh(), "modebi-s3", SMALL, [5, 5])
    assert opts[0].runlog_.to_csv() == opts[1].runlog_.to_csv()


def test_aggregate_median_over_infinite_runs():
    base = {"algorithm": "x", "problem": "p", "config_hash": "h", "final_hv": 0.5}
    summaries = [dict(base, seed=s, first_feasible_sims=f) for s, f in [(0, 3700), (1, 4100), (2, "inf")]]
    table = aggregate(summaries)
    assert table["first_feasible_median"] == 4100
    assert table["first_feasible_max"] == "inf" and table["feasible_runs"] == 2
    with pytest.raises(ValueError):
        aggregate([])


# -- estimators --------------------------------------------------------------------

def test_estimators_follow_sklearn_conventions():
    est = MODEBI("modebi-s1", pop_size=8, K=1.5)
    again = clone(est)
    assert again.get_params() == est.get_params() and again is not est
    assert GDE3().set_params(F=0.7).F == 0.7


def test_make_optimizer_dispatch():
    assert ALGORITHMS == ("gde3", "modebi-s1", "modebi-s2", "modebi-s3")
    assert isinstance(make_optimizer("gde3", SMALL), GDE3)
    opt = make_optimizer("modebi-s3", SMALL)
    assert isinstance(opt, MODEBI) and opt.scenario == "modebi-s3" and opt.pop_size == 8
    with pytest.raises(ValueError):
        make_optimizer("mace", SMALL)


def test_fitted_attributes():
    opt = GDE3(pop_size=12, budget=500, seed=0).fit(bnh())
    assert opt.n_sims_ == 500 and len(opt.population_) == 12
    front = opt.pareto_front_
    assert front.ndim == 2 and front.shape[1] == 2
    assert opt.final_hv((140.0, 55.0)) > 0
    assert 0 < opt.final_hv() <= 1.0
