"""Command-line interface.

Subcommands:

* ``test``      run the change test on a CSV field file
* ``simulate``  Monte Carlo rejection-rate tables
* ``generate``  write a synthetic field file

Exit codes: 0 retain, 3 reject, 1 usage error, 2 data error.
Flag values override a ``--config`` JSON file, which overrides defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bootstrap import TestConfig, run_test
from .errors import ConfigError, FieldFormatError
from .fieldio import parse_weight_flag, read_field, write_field, write_report, report_to_dict
from .gram import WeightSpec
from .lattice import LatticeShape
from .multipliers import KernelSpec
from .simulate import (
    ExperimentConfig,
    Scenario,
    gen_ar_field,
    gen_skewness_change,
    inject_mean_change,
    run_experiment,
)

EXIT_RETAIN = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REJECT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}")


def _change_set(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"expected THETA:GAMMA with comma-separated coordinates, got {text!r}"
        )
    theta = tuple(float(v) for v in parts[0].split(","))
    gamma = tuple(float(v) for v in parts[1].split(","))
    if len(theta) != len(gamma):
        raise argparse.ArgumentTypeError("theta and gamma must have the same length")
    return theta, gamma


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="episcan",
                     description="Rectangular change-set detection on lattice data")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, _Parser] = {}

    p_test = sub.add_parser("test", help="run the change test on a field file")
    p_test.add_argument("--input", required=True, help="field CSV path")
    p_test.add_argument("--stat", choices=["cvm", "mean"], default="cvm")
    p_test.add_argument("--kernel", choices=["ar", "ma"], default="ar")
    p_test.add_argument("--q", type=int, default=6, help="multiplier bandwidth")
    p_test.add_argument("--reps", type=int, default=199, help="bootstrap replicates")
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument("--mu", choices=["global", "adapted"], default="global")
    p_test.add_argument("--seed", type=int, default=0)
    p_test.add_argument("--weight", action="append", default=None, metavar="KIND:P1:P2",
                        help="per-coordinate weight, gaussian:LOC:SCALE or uniform:A:B;"
                             " repeat for vector observations")
    p_test.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p_test.add_argument("--emit-bootstrap", action="store_true",
                        help="include the bootstrap sample in the report")
    p_test.add_argument("--eps1", type=float, default=None)
    p_test.add_argument("--eps2", type=float, default=None)
    p_test.add_argument("--config", default=None, help="JSON file with flag defaults")
    subparsers["test"] = p_test

    p_sim = sub.add_parser("simulate", help="Monte Carlo rejection-rate tables")
    p_sim.add_argument("--scenario", choices=["null", "mean", "skew"], required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--d", type=int, default=2)
    p_sim.add_argument("--a", type=float, required=True)
    p_sim.add_argument("--delta", type=float, default=0.5)
    p_sim.add_argument("--change-set", type=_change_set, default=None,
                       metavar="T1,..:G1,..")
    p_sim.add_argument("--stat", choices=["cvm", "mean"], default="cvm")
    p_sim.add_argument("--kernel", choices=["ar", "ma"], default="ar")
    p_sim.add_argument("--q", type=_int_list, default=[2, 6, 10], metavar="LIST")
    p_sim.add_argument("--alpha", type=_float_list, default=[0.05, 0.1], metavar="LIST")
    p_sim.add_argument("--mu", choices=["global", "adapted"], default="global")
    p_sim.add_argument("--runs", type=int, default=200)
    p_sim.add_argument("--reps", type=int, default=199)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--weight", action="append", default=None, metavar="KIND:P1:P2")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: EPISCAN_WORKERS or 1)")
    p_sim.add_argument("--config", default=None)
    subparsers["simulate"] = p_sim

    p_gen = sub.add_parser("generate", help="write a synthetic field file")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--d", type=int, default=2)
    p_gen.add_argument("--a", type=float, required=True)
    kind = p_gen.add_mutually_exclusive_group()
    kind.add_argument("--delta", type=float, default=None, help="mean shift on the change set")
    kind.add_argument("--skew", action="store_true", help="skewness change on the change set")
    p_gen.add_argument("--change-set", type=_change_set, default=None, metavar="T1,..:G1,..")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--config", default=None)
    subparsers["generate"] = p_gen

    return parser, subparsers


def _weight_from_flags(flags: list[str] | None) -> WeightSpec | None:
    if not flags:
        return None
    return WeightSpec(tuple(parse_weight_flag(f) for f in flags))


def cmd_test(args) -> int:
    size_bounds = None
    if (args.eps1 is None) != (args.eps2 is None):
        raise ConfigError("--eps1 and --eps2 must be given together")
    if args.eps1 is not None:
        size_bounds = (args.eps1, args.eps2)
    cfg = TestConfig(
        statistic=args.stat,
        kernel=KernelSpec(args.kernel, args.q),
        n_bootstrap=args.reps,
        alpha=args.alpha,
        mean_estimator=args.mu,
        weight=_weight_from_flags(args.weight),
        size_bounds=size_bounds,
        seed=args.seed,
        keep_bootstrap=args.emit_bootstrap,
    )
    field_obs = read_field(args.input)
    report = run_test(field_obs, cfg)
    if args.out:
        write_report(report, args.out)
    else:
        json.dump(report_to_dict(report), sys.stdout, indent=2)
        sys.stdout.write("\n")
    print(
        f"statistic={report.statistic:.6g} threshold={report.threshold:.6g} "
        f"p_value={report.p_value:.6g} decision={report.decision}",
        file=sys.stderr,
    )
    return EXIT_REJECT if report.reject else EXIT_RETAIN


def cmd_simulate(args) -> int:
    if args.scenario == "null":
        scenario = Scenario.null()
    elif args.scenario == "mean":
        if args.change_set is None:
            raise ConfigError("--change-set is required for the mean scenario")
        scenario = Scenario.mean_change(args.delta, args.change_set)
    else:
        if args.change_set is None:
            raise ConfigError("--change-set is required for the skew scenario")
        scenario = Scenario.skewness_change(args.change_set)
    cfg = ExperimentConfig(
        n=args.n, a=args.a, scenario=scenario, d=args.d,
        statistic=args.stat,
        weight=_weight_from_flags(args.weight),
        kernel_kind=args.kernel,
        bandwidths=tuple(args.q),
        alphas=tuple(args.alpha),
        mean_estimator=args.mu,
        runs=args.runs,
        n_bootstrap=args.reps,
        seed=args.seed,
    )
    table = run_experiment(cfg, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "rejections.csv")
    json_path = os.path.join(args.out, "rejections.json")
    table.to_csv(csv_path)
    table.to_json(json_path)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return EXIT_RETAIN


def cmd_generate(args) -> int:
    shape = LatticeShape((args.n,) * args.d)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    if args.skew:
        if args.change_set is None:
            raise ConfigError("--skew needs --change-set")
        field_obs = gen_skewness_change(shape, args.a, args.change_set, rng)
    else:
        field_obs = gen_ar_field(shape, args.a, rng)
        if args.delta is not None:
            if args.change_set is None:
                raise ConfigError("--delta needs --change-set")
            field_obs = inject_mean_change(field_obs, args.delta, args.change_set)
    write_field(field_obs, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_RETAIN


def _apply_config_file(argv: list[str], subparsers: dict[str, _Parser]) -> None:
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1] if argv.index("--config") + 1 < len(argv) else None
    if path is None:
        raise _UsageError("--config needs a path")
    command = argv[0] if argv and not argv[0].startswith("-") else None
    if command not in subparsers:
        return
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise FieldFormatError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise FieldFormatError(f"malformed config file: {exc}") from None
    if not isinstance(doc, dict):
        raise FieldFormatError("config file must hold a JSON object")
    defaults = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest == "change_set" and isinstance(value, str):
            value = _change_set(value)
        defaults[dest] = value
    subparsers[command].set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subparsers = build_parser()
    try:
        _apply_config_file(argv, subparsers)
        args = parser.parse_args(argv)
        if args.command == "test":
            return cmd_test(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_generate(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FieldFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
