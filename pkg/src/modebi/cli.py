"""Command line entry point: ``modebi run`` and ``modebi campaign``.

Exit codes
----------
0  success
2  usage error (argparse)
3  unknown algorithm
4  unknown problem or missing problem file
5  malformed config or problem file
6  output directory not writable
7  budget below the initialization cost ``pop_size * corners``
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import PROBLEMS, get_problem, problem_from_file
from .core import AlgoConfig, ProblemError
from .estimators import ALGORITHMS
from .harness import campaign, ensure_writable, run
from .simulation import BudgetError

EXIT_OK = 0
EXIT_UNKNOWN_ALGORITHM = 3
EXIT_UNKNOWN_PROBLEM = 4
EXIT_MALFORMED = 5
EXIT_UNWRITABLE = 6
EXIT_BUDGET = 7


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _seed_list(text: str) -> list:
    """``"0,1,2"`` or ``"0-4"`` (inclusive) or a mix of both."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modebi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group(required=True)
    source.add_argument("--problem", metavar="NAME", help=f"benchmark name: {', '.join(sorted(PROBLEMS))}")
    source.add_argument("--problem-file", metavar="PATH", type=Path, help="problem definition JSON")
    common.add_argument("--algo", required=True, metavar="ID", help=f"one of: {', '.join(ALGORITHMS)}")
    common.add_argument("--budget", type=int, help="total simulations (design x corner pairs)")
    common.add_argument("--batch-size", type=int, default=None, help="parallel group size (default 50)")
    common.add_argument("--pop-size", type=int, default=None, help="population size (default 100)")
    common.add_argument("--config", type=Path, metavar="PATH", help="JSON object overriding AlgoConfig fields")
    common.add_argument("--out", type=Path, metavar="DIR", help="artifact directory")
    common.add_argument("--workers", type=int, default=1, help="evaluation threads")

    p_run = sub.add_parser("run", parents=[common], help="single run")
    p_run.add_argument("--seed", type=int, default=None)
    p_camp = sub.add_parser("campaign", parents=[common], help="one run per seed plus summary")
    p_camp.add_argument("--seeds", type=_seed_list, required=True, metavar="LIST",
                        help="comma separated seeds, ranges like 0-4 allowed")
    return parser


def _load_config(args) -> AlgoConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_MALFORMED, f"config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise CliError(EXIT_MALFORMED, f"config {args.config}: expected a JSON object")
    overrides = {"budget": args.budget, "batch_size": args.batch_size,
                 "pop_size": args.pop_size, "seed": getattr(args, "seed", None)}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return AlgoConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_MALFORMED, f"config: {exc}") from None


def _load_problem(args):
    if args.problem is not None:
        try:
            return get_problem(args.problem)
        except KeyError as exc:
            raise CliError(EXIT_UNKNOWN_PROBLEM, exc.args[0]) from None
    path = args.problem_file
    if not path.is_file():
        raise CliError(EXIT_UNKNOWN_PROBLEM, f"problem file not found: {path}")
    try:
        return problem_from_file(path)
    except KeyError as exc:
        raise CliError(EXIT_UNKNOWN_PROBLEM, exc.args[0]) from None
    except (ProblemError, ValueError) as exc:
        raise CliError(EXIT_MALFORMED, f"problem file {path}: {exc}") from None


def execute(args) -> int:
    if args.algo not in ALGORITHMS:
        raise CliError(EXIT_UNKNOWN_ALGORITHM, f"unknown algorithm {args.algo!r}; choose from {', '.join(ALGORITHMS)}")
    problem = _load_problem(args)
    config = _load_config(args)
    if args.out is not None:
        try:
            ensure_writable(args.out)
        except OSError as exc:
            raise CliError(EXIT_UNWRITABLE, f"output path not writable: {exc}") from None
    try:
        if args.command == "run":
            _, summary = run(problem, args.algo, config, args.out, args.workers)
        else:
            _, _, summary = campaign(problem, args.algo, config, args.seeds, args.out, args.workers)
    except BudgetError as exc:
        raise CliError(EXIT_BUDGET, str(exc)) from None
    except OSError as exc:
        raise CliError(EXIT_UNWRITABLE, f"output path not writable: {exc}") from None
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return execute(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
