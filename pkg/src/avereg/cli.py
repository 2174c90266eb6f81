"""Command-line interface.

Subcommands::

    solve            one-shot solve from a matrix CSV and a measurements CSV
    simulate         run a Monte-Carlo study from a JSON config
    counterexample   the divergence construction of the discrepancy principle
    heat             severely ill-posed heavy-tail study (built-in defaults)
    binopt           binary-option differentiation study (built-in defaults)
    verify-filters   grid certification of the filter constants

Exit codes: 0 success, 1 I/O or parse errors, 2 degenerate statistics,
3 verification failure.  Every command is deterministic given its flags,
config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .errors import (
    ConfigError,
    DegenerateBatchError,
    InputError,
    NonTerminationError,
    NumericalError,
    StudyError,
)
from .filters import FilterSpec, apply_regularizer, verify_filter_constants
from .selection import AprioriRule, apriori_alpha, discrepancy_principle
from .spectral import embed_solution, load_matrix_csv, project_data, svd
from .study import (
    StudyConfig,
    default_binopt_config,
    default_counterexample_config,
    default_heat_config,
    format_summary_table,
    run_study,
    write_study_csvs,
)

_FILTER_CHOICES = ("tikhonov", "iterated_tikhonov", "tsvd", "landweber")
_RULE_CHOICES = ("dp", "dp+es", "apriori")
_DELTA_CHOICES = ("inv_sqrt_n", "sample_std", "lil")


def _parse_filter(name: str, order: int, relaxation: float) -> FilterSpec:
    if name == "iterated_tikhonov":
        return FilterSpec.iterated_tikhonov(order)
    if name == "landweber":
        return FilterSpec.landweber(relaxation)
    return FilterSpec(name)


def _solve_delta(samples: np.ndarray, rule: str, tau: float) -> float:
    n = samples.shape[0]
    if rule == "inv_sqrt_n":
        return 1.0 / math.sqrt(n)
    if n < 2:
        raise DegenerateBatchError("sample-based noise estimates need n >= 2 measurements")
    mean = samples.mean(axis=0)
    s = math.sqrt(float(np.sum((samples - mean) ** 2)) / (n - 1))
    if s == 0.0:
        raise DegenerateBatchError("all measurements coincide")
    if rule == "sample_std":
        return s / math.sqrt(n)
    if tau <= 1:
        raise InputError("lil rule requires --tau > 1")
    if n < 16:
        raise DegenerateBatchError("lil rule requires n >= 16 measurements")
    return tau * s * math.sqrt(2.0 * math.log(math.log(n)) / n)


def _cmd_solve(args) -> int:
    matrix = load_matrix_csv(args.matrix)
    try:
        samples = np.loadtxt(args.measurements, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot parse measurements CSV {args.measurements}: {exc}") from exc
    if samples.shape[1] != matrix.shape[0]:
        raise InputError(
            f"measurement rows have {samples.shape[1]} columns, "
            f"matrix has {matrix.shape[0]} rows"
        )
    op = svd(matrix)
    spec = _parse_filter(args.filter, args.order, args.relaxation)
    n = samples.shape[0]
    delta = _solve_delta(samples, args.delta, args.tau)
    y_bar = project_data(op, samples.mean(axis=0))

    if args.rule == "apriori":
        alpha = apriori_alpha(AprioriRule("inv_sqrt_n_alpha"), delta, n)
        choice_info = {"alpha": alpha, "k": -1, "emergency_triggered": False,
                       "delta_est_used": delta}
    else:
        choice = discrepancy_principle(
            op, spec, y_bar, delta, q=args.q,
            emergency_n=n if args.rule == "dp+es" else None,
        )
        alpha = choice.alpha
        choice_info = json.loads(choice.to_json())

    solution = apply_regularizer(op, spec, alpha, y_bar)
    choice_info["residual"] = solution.residual
    x = embed_solution(op, solution.x)

    os.makedirs(args.out, exist_ok=True)
    solution_path = os.path.join(args.out, "solution.csv")
    with open(solution_path, "w") as fh:
        fh.write("\n".join(f"{value:.17g}" for value in x) + "\n")
    choice_path = os.path.join(args.out, "choice.json")
    with open(choice_path, "w") as fh:
        json.dump(choice_info, fh, sort_keys=True)
        fh.write("\n")
    print(f"wrote {solution_path} and {choice_path} "
          f"(alpha={alpha:.6g}, residual={solution.residual:.6g})")
    return 0


def _run_and_emit(config: StudyConfig, out_dir: str) -> int:
    result = run_study(config)
    write_study_csvs(result, out_dir)
    for rule in result.rule_names:
        for n in result.sample_sizes:
            summary = result.summaries.get((rule, n))
            if summary is not None:
                print(f"completed rule={rule} n={n} ({summary.count} replications)")
    print(format_summary_table(result))
    return 0


def _load_config(path: str | None, default: dict, seed: int | None) -> StudyConfig:
    if path is None:
        config = StudyConfig.from_dict(default)
    else:
        config = StudyConfig.from_json(path)
    if seed is not None:
        config = dataclasses.replace(config, base_seed=seed)
    return config


def _cmd_simulate(args) -> int:
    config = _load_config(args.config, None, args.seed)
    return _run_and_emit(config, args.out)


def _cmd_counterexample(args) -> int:
    raw = default_counterexample_config(args.n_max, forced=args.forced,
                                        emergency=args.emergency)
    config = _load_config(None, raw, args.seed)
    result = run_study(config)
    write_study_csvs(result, args.out)
    rule = result.rule_names[0]
    for n in result.sample_sizes:
        record = result.records[(rule, n)][0]
        print(f"n={n} alpha={record.alpha:.6g} k={record.k} "
              f"emergency={int(record.emergency)} error={record.error:.6g}")
    return 0


def _cmd_heat(args) -> int:
    config = _load_config(args.config, default_heat_config(), args.seed)
    return _run_and_emit(config, args.out)


def _cmd_binopt(args) -> int:
    config = _load_config(args.config, default_binopt_config(), args.seed)
    return _run_and_emit(config, args.out)


def _cmd_verify_filters(args) -> int:
    cases = [
        (FilterSpec.tikhonov(), 2.0),
        (FilterSpec.iterated_tikhonov(2), 4.0),
        (FilterSpec.tsvd(), 20.0),
        (FilterSpec.landweber(), 20.0),
    ]
    all_passed = True
    for spec, nu in cases:
        report = verify_filter_constants(spec, sigma_max=1.0, nu=nu)
        status = "pass" if report.passed else "FAIL"
        print(f"{report.kind}: C_R {report.c_r_observed:.6g}/{report.c_r_declared:.6g} "
              f"C_F {report.c_f_observed:.6g}/{report.c_f_declared:.6g} "
              f"C_nu(nu={nu:g}) {report.c_nu_observed:.6g}/{report.c_nu_declared:.6g} "
              f"monotone={report.monotone} -> {status}")
        for violation in report.violations:
            print(f"  violation: {violation}")
        all_passed = all_passed and report.passed
    return 0 if all_passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avereg",
        description="Regularized solution of ill-posed linear equations "
                    "from repeated noisy measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve from a matrix and measurement CSVs")
    solve.add_argument("--matrix", required=True, help="operator matrix CSV (row-major)")
    solve.add_argument("--measurements", required=True,
                       help="measurements CSV, one sample per row")
    solve.add_argument("--filter", default="tikhonov", choices=_FILTER_CHOICES)
    solve.add_argument("--order", type=int, default=2,
                       help="iterated Tikhonov order (default 2)")
    solve.add_argument("--relaxation", type=float, default=0.9,
                       help="Landweber relaxation (default 0.9)")
    solve.add_argument("--rule", default="dp", choices=_RULE_CHOICES)
    solve.add_argument("--delta", default="sample_std", choices=_DELTA_CHOICES)
    solve.add_argument("--q", type=float, default=0.7)
    solve.add_argument("--tau", type=float, default=1.5)
    solve.add_argument("--out", default=".")
    solve.set_defaults(func=_cmd_solve)

    simulate = sub.add_parser("simulate", help="run a study from a JSON config")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--out", default="study_out")
    simulate.set_defaults(func=_cmd_simulate)

    counter = sub.add_parser("counterexample", help="the divergence construction")
    counter.add_argument("--n-max", type=int, default=6)
    counter.add_argument("--forced", action="store_true",
                         help="force all latent normals to 1")
    counter.add_argument("--emergency", action="store_true",
                         help="enable the emergency stop")
    counter.add_argument("--seed", type=int, default=None)
    counter.add_argument("--out", default="study_out")
    counter.set_defaults(func=_cmd_counterexample)

    heat = sub.add_parser("heat", help="severely ill-posed heavy-tail study")
    heat.add_argument("--config", default=None)
    heat.add_argument("--seed", type=int, default=None)
    heat.add_argument("--out", default="study_out")
    heat.set_defaults(func=_cmd_heat)

    binopt = sub.add_parser("binopt", help="binary-option differentiation study")
    binopt.add_argument("--config", default=None)
    binopt.add_argument("--seed", type=int, default=None)
    binopt.add_argument("--out", default="study_out")
    binopt.set_defaults(func=_cmd_binopt)

    verify = sub.add_parser("verify-filters", help="certify the filter constants")
    verify.set_defaults(func=_cmd_verify_filters)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DegenerateBatchError, StudyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, InputError, NumericalError, NonTerminationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
