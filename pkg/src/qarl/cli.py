"""Command-line entry point.

Subcommands: solve-qre, solve-game, train, eval, sweep, report.
Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, report
from .envs import EnvConfigError, ParamSweep
from .game import MarkovGame
from .harness import ConfigError, ExperimentConfig
from .matrix import ConvergenceError, MatrixGame, solve_logit_qre
from .planning import solve_soft_markov_game


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qarl")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-qre", help="solve a logit QRE of a matrix game")
    p.add_argument("--payoff", required=True, help="JSON file holding a 2-D payoff array")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--tau-col", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("solve-game", help="solve a regularized Markov game exactly")
    p.add_argument("--game", required=True, help="MarkovGame JSON file")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("train", help="run a training algorithm")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--algorithm", default=None)
    p.add_argument("--fix-rate", action="store_true")
    p.add_argument("--greedy-adversary", action="store_true")
    p.add_argument("--update-interval", type=int, default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint against a trained adversary")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="no-adversary robustness sweep of a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--axis1", required=True, help="name:m1,m2,... multiplier list")
    p.add_argument("--axis2", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sweep.csv")

    p = sub.add_parser("report", help="render SVG reports from CSV")
    p.add_argument("--grid", default=None, help="robustness grid CSV -> heatmap SVG")
    p.add_argument("--returns", default=None, help="per-seed returns CSV -> boxplot SVG")
    p.add_argument("--out", default="report.svg")

    return parser


def _load_json(path: str):
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    with open(path) as fh:
        return json.load(fh)


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json_dict(_load_json(args.config))
    overrides = {}
    if getattr(args, "algorithm", None):
        overrides["algorithm"] = args.algorithm
    if getattr(args, "fix_rate", False):
        overrides["fix_rate"] = True
    if getattr(args, "greedy_adversary", False):
        overrides["greedy_adversary"] = True
    if getattr(args, "update_interval", None) is not None:
        overrides["update_interval"] = args.update_interval
    if overrides:
        d = config.to_json_dict()
        d.update(overrides)
        config = ExperimentConfig.from_json_dict(d)
    return config


def _parse_axis(text: str):
    try:
        name, values = text.split(":", 1)
        return name, tuple(float(v) for v in values.split(","))
    except ValueError as err:
        raise ConfigError(f"bad axis spec {text!r}; expected name:m1,m2,...") from err


def _cmd_solve_qre(args) -> int:
    payoff = np.array(_load_json(args.payoff), dtype=float)
    tau_col = args.tau if args.tau_col is None else args.tau_col
    sol = solve_logit_qre(MatrixGame(payoff), args.tau, tau_col, tol=args.tol)
    print(json.dumps(sol.to_json_dict()))
    return 0


def _cmd_solve_game(args) -> int:
    game = MarkovGame.from_json_dict(_load_json(args.game))
    q, mu, nu, rep = solve_soft_markov_game(game, args.alpha, args.beta, tol=args.tol)
    print(
        json.dumps(
            {
                "q": q.q.tolist(),
                "v": q.v.tolist(),
                "mu": mu.probs.tolist(),
                "nu": nu.probs.tolist(),
                "iterations": rep.iterations,
                "converged": rep.converged,
            }
        )
    )
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    seeds = [args.seed] if args.seed is not None else list(config.seeds)
    os.makedirs(args.out, exist_ok=True)
    for seed in seeds:
        record = harness.train(config, seed)
        stem = os.path.join(args.out, f"{config.algorithm}_seed{seed}")
        report.atomic_write_text(
            f"{stem}.json", json.dumps(record.to_json_dict(), indent=None)
        )
        report.write_trace_csv(f"{stem}.csv", record.iterations, seed)
        print(f"wrote {stem}.json and {stem}.csv")
    return 0


def _cmd_eval(args) -> int:
    from .agents import SoftQTable

    config = _load_config(args)
    protagonist = SoftQTable.load(args.checkpoint)
    score = harness.eval_vs_trained_adversary(protagonist, config, seed=args.seed)
    print(json.dumps({"return_vs_trained_adversary": score, "seed": args.seed}))
    return 0


def _cmd_sweep(args) -> int:
    from .agents import SoftQTable

    config = _load_config(args)
    a1_name, a1_mults = _parse_axis(args.axis1)
    a2_name, a2_mults = _parse_axis(args.axis2)
    sweep = ParamSweep(a1_name, a1_mults, a2_name, a2_mults)
    protagonist = SoftQTable.load(args.checkpoint)
    rep = harness.robustness_sweep(protagonist, sweep, config, seed=args.seed)
    report.write_grid_csv(args.out, rep.robustness_grid, a1_mults, a2_mults)
    print(json.dumps(rep.to_json_dict()))
    return 0


def _cmd_report(args) -> int:
    if args.grid is None and args.returns is None:
        raise ConfigError("report needs --grid and/or --returns")
    if args.grid is not None:
        grid, axis1, axis2 = report.read_grid_csv(args.grid)
        report.atomic_write_text(args.out, report.heatmap_svg(grid, axis1, axis2))
        print(f"wrote {args.out}")
    if args.returns is not None:
        data: dict[str, list[float]] = {}
        import csv as _csv

        with open(args.returns, newline="") as fh:
            for row in _csv.DictReader(fh):
                data.setdefault(row["label"], []).append(float(row["value"]))
        out = args.out if args.grid is None else args.out.replace(".svg", "_box.svg")
        report.atomic_write_text(out, report.boxplot_svg(data))
        print(f"wrote {out}")
    return 0


_COMMANDS = {
    "solve-qre": _cmd_solve_qre,
    "solve-game": _cmd_solve_game,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, EnvConfigError, FileNotFoundError, KeyError,
            json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ConvergenceError, RuntimeError, ValueError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
