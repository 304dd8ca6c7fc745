"""Command-line entry point.

Subcommands:

* ``sweep``      config file -> trade-off curve CSV
* ``calibrate``  problem JSON + lambda -> sampled ranking and serialized policy
* ``decompose``  matrix file -> policy file
* ``bench``      config file -> runtime table
* ``validate``   data paths -> violation report

Every sweep/bench config key can be overridden by a flag of the same name
(dashes for underscores). All randomness flows from the single ``--seed``.
Exit code is 0 on success and 1 on any error or validation finding.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness
from .bvn import augment_and_get_ds, bvn_decompose, drop_zero_rows, write_policy
from .core_model import HARD_TOLERANCE, PartialStochasticMatrix, DoublyStochasticMatrix, validate_problem
from .data_io import EmptyDatasetError, ParseError, load_interactions, load_problem, load_scores


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    for key in harness.CONFIG_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, help=f"override config key {key}")


def _config_from_args(args: argparse.Namespace) -> harness.SweepConfig:
    file_values = harness.parse_config(args.config) if args.config else {}
    overrides = {key: getattr(args, key) for key in harness.CONFIG_KEYS}
    return harness.make_config(file_values, overrides)


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    points = harness.run_sweep(config)
    if config.output:
        print(f"wrote {len(points)} rows to {config.output}")
    else:
        print(harness.points_to_csv(points, with_times=config.with_times), end="")
    return 0


def _cmd_bench(args) -> int:
    config = _config_from_args(args)
    report = harness.benchmark(config)
    print(report.render_text(), end="")
    return 0


def _cmd_calibrate(args) -> int:
    problem = load_problem(args.problem)
    if args.lam is not None:
        problem = problem.with_lambda(args.lam)
    issues = validate_problem(problem)
    if issues:
        for issue in issues:
            print(f"{args.problem}: {issue}", file=sys.stderr)
        return 1
    result = harness.run_pipeline(problem, args.method, args.seed)
    if args.policy_out:
        write_policy(result.policy, args.policy_out)
        print(f"wrote policy with {len(result.policy)} components to {args.policy_out}", file=sys.stderr)
    for slot, item in enumerate(result.ranking.top(problem.k), start=1):
        print(f"{slot} {int(item)}")
    return 0


def _cmd_decompose(args) -> int:
    values = np.loadtxt(args.matrix, ndmin=2)
    rows, cols = values.shape
    row_sums = values.sum(axis=1)
    if rows == cols and float(np.abs(row_sums - 1.0).max()) <= HARD_TOLERANCE:
        ds = DoublyStochasticMatrix(values, tuple(range(rows)))
    else:
        partial = PartialStochasticMatrix(values, tuple(range(rows)))
        ds = augment_and_get_ds(drop_zero_rows(partial))
    policy = bvn_decompose(ds, residual_tolerance=args.residual_tolerance)
    write_policy(policy, args.output)
    print(f"wrote policy with {len(policy)} components to {args.output}")
    return 0


def _cmd_validate(args) -> int:
    findings: list[str] = []
    for path in args.problem or []:
        try:
            problem = load_problem(path)
        except (ParseError, ValueError) as exc:
            findings.append(f"{path}: {exc}")
            continue
        findings.extend(f"{path}: {issue}" for issue in validate_problem(problem))
    if args.interactions:
        try:
            dataset = load_interactions(
                args.interactions,
                positive_threshold=args.positive_threshold,
                min_interactions=args.min_interactions,
                items_path=args.items,
            )
            if args.scores:
                load_scores(args.scores, catalog=dataset.items)
        except (ParseError, EmptyDatasetError) as exc:
            findings.append(str(exc))
    elif args.scores:
        try:
            load_scores(args.scores)
        except (ParseError, EmptyDatasetError) as exc:
            findings.append(str(exc))
    for finding in findings:
        print(finding)
    if findings:
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calibrank", description="Calibrated re-ranking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a trade-off sweep and write its CSV")
    _add_config_flags(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    bench = sub.add_parser("bench", help="runtime table per method")
    _add_config_flags(bench)
    bench.set_defaults(func=_cmd_bench)

    calibrate = sub.add_parser("calibrate", help="rank one problem file")
    calibrate.add_argument("--problem", required=True, help="problem JSON file")
    calibrate.add_argument("--lam", type=float, default=None, help="trade-off weight override")
    calibrate.add_argument("--method", default="excalibr_reduced", choices=harness.METHODS)
    calibrate.add_argument("--seed", type=int, default=0)
    calibrate.add_argument("--policy-out", help="write the sampling policy to this file")
    calibrate.set_defaults(func=_cmd_calibrate)

    decompose = sub.add_parser("decompose", help="decompose a matrix file into a policy file")
    decompose.add_argument("--matrix", required=True, help="whitespace-separated matrix file")
    decompose.add_argument("--output", required=True, help="policy file to write")
    decompose.add_argument("--residual-tolerance", type=float, default=1e-9)
    decompose.set_defaults(func=_cmd_decompose)

    validate = sub.add_parser("validate", help="report invariant violations in data files")
    validate.add_argument("--problem", action="append", help="problem JSON file (repeatable)")
    validate.add_argument("--interactions")
    validate.add_argument("--items")
    validate.add_argument("--scores")
    validate.add_argument("--positive-threshold", type=float, default=3.5)
    validate.add_argument("--min-interactions", type=int, default=5)
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
