import json

import pytest

from modebi import cli
from modebi.bench import bnh
from modebi.core import problem_to_dict


def call(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_happy_path(tmp_path, capsys):
    code, out, _ = call(capsys, "run", "--problem", "bnh", "--algo", "modebi-s2", "--budget", "160",
                        "--pop-size", "8", "--seed", "1", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads(out)
    assert summary["sims_used"] == 160 and summary["seed"] == 1
    assert (tmp_path / "runlog.csv").is_file()


def test_unknown_algorithm(capsys):
    code, _, err = call(capsys, "run", "--problem", "bnh", "--algo", "nsga2")
    assert code == cli.EXIT_UNKNOWN_ALGORITHM and "unknown algorithm" in err


def test_unknown_problem(tmp_path, capsys):
    code, _, err = call(capsys, "run", "--problem", "zdt1", "--algo", "gde3")
    assert code == cli.EXIT_UNKNOWN_PROBLEM and "unknown problem" in err
    code, _, _ = call(capsys, "run", "--problem-file", str(tmp_path / "nope.json"), "--algo", "gde3")
    assert code == cli.EXIT_UNKNOWN_PROBLEM


def test_malformed_inputs(tmp_path, capsys):
    bad = tmp_path / "cfg.json"
    bad.write_text("{not json")
    code, _, _ = call(capsys, "run", "--problem", "bnh", "--algo", "gde3", "--config", str(bad))
    assert code == cli.EXIT_MALFORMED
    bad.write_text(json.dumps({"popsize": 3}))
    code, _, err = call(capsys, "run", "--problem", "bnh", "--algo", "gde3", "--config", str(bad))
    assert code == cli.EXIT_MALFORMED and "unknown config field" in err
    prob = tmp_path / "p.json"
    prob.write_text(json.dumps({"name": "bnh"}))
    code, _, _ = call(capsys, "run", "--problem-file", str(prob), "--algo", "gde3")
    assert code == cli.EXIT_MALFORMED


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = call(capsys, "run", "--problem", "bnh", "--algo", "gde3", "--out", str(blocker / "sub"))
    assert code == cli.EXIT_UNWRITABLE and "not writable" in err


def test_budget_below_init_cost(capsys):
    code, _, err = call(capsys, "run", "--problem", "bnh", "--algo", "gde3", "--budget", "0")
    assert code == cli.EXIT_BUDGET and "budget below initialization cost N·C" in err


def test_problem_file_and_config(tmp_path, capsys):
    prob = tmp_path / "bnh3.json"
    prob.write_text(json.dumps(problem_to_dict(bnh(3).spec)))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pop_size": 6, "budget": 60, "F": 0.6}))
    code, out, _ = call(capsys, "run", "--problem-file", str(prob), "--algo", "gde3", "--config", str(cfg))
    summary = json.loads(out)
    assert code == 0 and summary["init_cost"] == 18 and summary["sims_used"] == 60


def test_campaign_with_seed_range(tmp_path, capsys):
    code, out, _ = call(capsys, "campaign", "--problem", "bnh", "--algo", "gde3", "--seeds", "0-1,4",
                        "--budget", "40", "--pop-size", "5", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["seeds"] == [0, 1, 4]
    assert sorted(p.name for p in tmp_path.glob("seed-*")) == ["seed-0", "seed-1", "seed-4"]


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--algo", "gde3"])
    assert exc.value.code == 2
