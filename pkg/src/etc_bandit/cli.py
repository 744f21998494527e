"""Command-line entry point: ``etc-bandit <command> [flags]``.

Exit codes: 0 success, 1 validation, 2 I/O, 3 numeric or capacity failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import CostSpec, cost_regret_argmin, exact_regret_two_arm
from .errors import CapacityError, InputError, NumericError, SamplingError
from .estimators import ExplorationLog, estimate_fte, estimate_ote_independent, estimate_ote_paired, sample_size_fte
from .harness import ExperimentConfig, run_experiment, write_results
from .reproduce import DEFAULT_SEED, FIGURES, reproduce

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}")
        bad = (
            (lo is not None and (value <= lo if lo_open else value < lo))
            or (hi is not None and (value >= hi if hi_open else value > hi))
        )
        if bad:
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            raise argparse.ArgumentTypeError(
                f"{value} outside {left}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{right}"
            )
        return value
    return parse


def _load_log(path: str, paired: bool) -> ExplorationLog:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                if i == 0:
                    continue  # header
                raise InputError(f"{path}:{i + 1}: non-numeric reward row")
    return ExplorationLog(np.array(rows, dtype=float), paired=paired)


def cmd_sample_size(args) -> int:
    print(sample_size_fte(args.k, args.epsilon, args.delta_p, args.m))
    return EXIT_OK


def cmd_estimate(args) -> int:
    log_ = _load_log(args.log, paired=True)
    if args.m > log_.N:
        raise InputError(f"--m {args.m} exceeds the number of observations N={log_.N}")
    if args.m == 1 and args.budget is None:
        if args.mode == "paired":
            est = estimate_ote_paired(log_, args.threshold)
        else:
            est = estimate_ote_independent(log_, args.threshold)
    else:
        est = estimate_fte(log_, args.m, args.mode, args.budget, rng=np.random.default_rng(args.seed))
    print(json.dumps({
        "method": est.method, "m": est.M, "values": [float(v) for v in est.values],
        "counts": list(est.counts), "denominator": est.denominator, "chosen_arm": est.argmax(),
    }))
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ExperimentConfig.load(args.config)
    curve = run_experiment(config, workers=args.threads)
    write_results(curve, args.out)
    logging.getLogger(__name__).info("wrote %d rows to %s", len(curve.points), args.out)
    return EXIT_OK


def cmd_exact_regret(args) -> int:
    print(repr(exact_regret_two_arm(args.p_star, args.n)))
    return EXIT_OK


def cmd_tradeoff(args) -> int:
    if args.n_max < args.n_min:
        raise InputError("--n-max must be >= --n-min")
    res = cost_regret_argmin(args.p_star, CostSpec(args.divisor, args.alpha, range(args.n_min, args.n_max + 1)))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("n,cost,regret,objective\n")
            for row in zip(res.n_grid, res.cost, res.regret, res.objective):
                fh.write(f"{int(row[0])},{row[1]!r},{row[2]!r},{row[3]!r}\n")
    print(res.n_opt)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    figures = FIGURES if args.figure == "all" else (args.figure,)
    for fig in figures:
        path = reproduce(fig, args.out, args.reps, args.seed, args.threads)
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="etc-bandit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("sample-size", help="exploration budget per arm for a regret target")
    p.add_argument("--k", type=_ranged(int, 2), required=True, help="number of arms, integer >= 2")
    p.add_argument("--epsilon", type=_ranged(float, 0, 1, True, True), required=True,
                   help="regret bound epsilon_r in (0, 1)")
    p.add_argument("--delta-p", type=_ranged(float, 0, 1, True), required=True,
                   help="win-probability gap in (0, 1]")
    p.add_argument("--m", type=_ranged(int, 1), default=1, help="exploitations M, integer >= 1 (default 1)")
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("estimate", help="win probabilities from an exploration log CSV")
    p.add_argument("--log", required=True, help="CSV, one row per observation, one column per arm")
    p.add_argument("--m", type=_ranged(int, 1), default=1, help="exploitations M, integer in [1, N]")
    p.add_argument("--mode", choices=("independent", "paired"), default="independent",
                   help="cross-arm tuples (independent) or row-matched (paired)")
    p.add_argument("--threshold", type=float, default=None, help="optional constant c added to the comparison")
    p.add_argument("--budget", type=_ranged(int, 1), default=None,
                   help="sampled subset tuples when C(N, M) exceeds the cap, integer >= 1")
    p.add_argument("--seed", type=_ranged(int, 0), default=0, help="seed for sampled estimation, >= 0")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run an experiment config and write a regret CSV")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=_ranged(int, 1), default=None,
                   help=f"worker count >= 1 (overridden by ETC_BANDIT_THREADS)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact-regret", help="closed-form two-arm strong regret")
    p.add_argument("--p-star", type=_ranged(float, 0, 1), required=True, help="win probability of the best arm in [0, 1]")
    p.add_argument("--n", type=_ranged(int, 1, 10**5), required=True, help="explorations N in [1, 100000]")
    p.set_defaults(func=cmd_exact_regret)

    p = sub.add_parser("tradeoff", help="minimise N / divisor + alpha * regret over N")
    p.add_argument("--p-star", type=_ranged(float, 0, 1), required=True, help="win probability of the best arm in [0, 1]")
    p.add_argument("--divisor", type=_ranged(float, 0, None, True), default=5.0, help="cost divisor > 0 (default 5)")
    p.add_argument("--alpha", type=_ranged(float, 0), default=100.0, help="trade-off weight >= 0 (default 100)")
    p.add_argument("--n-min", type=_ranged(int, 1, 10**5), default=1, help="smallest N in [1, 100000] (default 1)")
    p.add_argument("--n-max", type=_ranged(int, 1, 10**5), default=200, help="largest N in [1, 100000] (default 200)")
    p.add_argument("--out", default=None, help="optional CSV of the objective curve")
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("reproduce", help="emit the data behind a figure")
    p.add_argument("figure", choices=FIGURES + ("all",), help="one of " + ", ".join(FIGURES) + ", all")
    p.add_argument("--out", default="results", help="output directory (default ./results)")
    p.add_argument("--reps", type=_ranged(int, 1), default=None,
                   help="replications >= 1 (default 100000; 500000 for fig3)")
    p.add_argument("--seed", type=_ranged(int, 0, 2**64 - 1), default=DEFAULT_SEED, help="64-bit master seed")
    p.add_argument("--threads", type=_ranged(int, 1), default=None, help="worker count >= 1")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CapacityError, NumericError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
