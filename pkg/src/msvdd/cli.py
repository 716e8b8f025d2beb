"""Command-line front end.

Subcommands: generate, solve, cv, gap, plotdata.  Exit codes: 0 success,
1 input error, 2 solver failure, 3 time limit hit with an incumbent returned.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .data import (
    SyntheticSpec,
    generate_synthetic,
    read_dataset_csv,
    write_dataset_csv,
    write_spec_json,
)
from .errors import InputError, MsvddError, SolverFailure
from .exact import MsvddProblem, incumbent_gap_rows, solve_exact
from .experiments import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    emit_plot_data,
    run_cross_validation,
    run_gap_study,
    solution_to_dict,
)
from .heuristic import HeuristicConfig, solve_heuristic
from .kernels import KernelKind, KernelSpec, gram
from .solution import SolveStatus

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_TIME_LIMIT = 3


def _kernel_from_args(args) -> KernelSpec:
    if args.kernel == "linear":
        return KernelSpec(KernelKind.LINEAR)
    if args.sigma2 is None:
        raise InputError("--sigma2 is required with --kernel rbf")
    return KernelSpec(KernelKind.RBF, args.sigma2)


def _add_solver_flags(sub):
    sub.add_argument("--p", type=int, default=2, help="number of spheres")
    sub.add_argument("--C", type=float, default=0.2, help="outlier penalty (exact model)")
    sub.add_argument("--nu", type=float, default=None, help="run the heuristic with this outlier fraction instead")
    sub.add_argument("--kernel", choices=["linear", "rbf"], default="linear")
    sub.add_argument("--sigma2", type=float, default=None, help="RBF bandwidth (denominator)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--time-limit", type=float, default=None)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument(
        "--cardinality", choices=["on", "off"], default="on",
        help="enforce the ceil(1/C) member floor per sphere",
    )
    sub.add_argument("--out", default="results")


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        n_train=args.n_train,
        n_val=args.n_val,
        n_test=args.n_test,
        noise_level=args.noise,
        seed=args.seed,
    )
    dataset = generate_synthetic(spec)
    os.makedirs(args.out, exist_ok=True)
    write_dataset_csv(dataset, os.path.join(args.out, "dataset.csv"))
    write_spec_json(spec, os.path.join(args.out, "spec.json"))
    print(f"wrote {dataset.n} points ({args.noise:.0%} anomalies) to {args.out}/dataset.csv")
    return EXIT_OK


def cmd_solve(args) -> int:
    dataset = read_dataset_csv(args.data)
    if dataset.split is not None and "train" in set(dataset.split):
        train = dataset.subset("train")
    else:
        train = dataset
    kspec = _kernel_from_args(args)
    gram_train = gram(kspec, train.points)
    if args.nu is not None:
        config = HeuristicConfig(p=args.p, nu=args.nu, seed=args.seed)
        sol = solve_heuristic(gram_train, config)
    else:
        problem = MsvddProblem(
            gram=gram_train,
            p=args.p,
            C=args.C,
            enforce_cardinality=args.cardinality == "on",
            time_limit=args.time_limit,
            seed=args.seed,
        )
        sol = solve_exact(problem)

    os.makedirs(args.out, exist_ok=True)
    payload = solution_to_dict(sol, train_points=train.points)
    with open(os.path.join(args.out, "solution.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if sol.incumbent_log:
        with open(os.path.join(args.out, "incumbents.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["wall_time_s", "objective", "gap", "reference"]
            )
            writer.writeheader()
            for row in incumbent_gap_rows(sol):
                writer.writerow(row)

    print(f"status:     {sol.status.value}")
    if sol.status is not SolveStatus.INFEASIBLE:
        print(f"objective:  {sol.objective:.6f}")
        print(f"spheres:    {[len(s.members) for s in sol.spheres]} members")
        print(f"radii_sq:   {[round(s.radius_sq, 6) for s in sol.spheres]}")
        print(f"nodes:      {sol.node_count}")
        outliers = int(np.sum([np.sum(s.errors > 1e-9) for s in sol.spheres]))
        print(f"outliers:   {outliers} training points with positive error")
    print(f"solution:   {os.path.join(args.out, 'solution.json')}")

    if sol.status is SolveStatus.INFEASIBLE:
        print("infeasible: p * ceil(1/C) exceeds the point count", file=sys.stderr)
        return EXIT_INPUT
    if sol.status is SolveStatus.TIME_LIMIT_INCUMBENT and args.nu is None:
        return EXIT_TIME_LIMIT
    return EXIT_OK


def _config_from_args(args) -> ExperimentConfig:
    payload = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
    config = config_from_dict(payload)
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.p:
        overrides["p_grid"] = tuple(args.p)
    if args.C:
        overrides["C_grid"] = tuple(args.C)
    if args.nu:
        overrides["nu_grid"] = tuple(args.nu)
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.kernel:
        kernels = []
        for name in args.kernel:
            if name == "linear":
                kernels.append(KernelSpec(KernelKind.LINEAR))
            else:
                for s2 in args.sigma2 or []:
                    kernels.append(KernelSpec(KernelKind.RBF, s2))
        if not kernels:
            raise InputError("no usable kernel grid (rbf needs --sigma2)")
        overrides["kernels"] = tuple(kernels)
    if args.time_limit is not None:
        overrides["time_limit"] = args.time_limit
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.cardinality:
        overrides["enforce_cardinality"] = args.cardinality == "on"
    if args.out:
        overrides["out_dir"] = args.out
    if overrides:
        merged = config_to_dict(config)
        merged.update(
            {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in overrides.items()
                if k != "kernels"
            }
        )
        if "kernels" in overrides:
            merged["kernels"] = [
                {"kind": k.kind.value, "sigma_squared": k.sigma_squared}
                for k in overrides["kernels"]
            ]
        config = config_from_dict(merged)
    return config


def _add_grid_flags(sub):
    sub.add_argument("--config", default=None, help="JSON experiment config")
    sub.add_argument("--mode", choices=["exact", "heuristic", "both"], default=None)
    sub.add_argument("--p", type=int, nargs="*", default=None)
    sub.add_argument("--C", type=float, nargs="*", default=None)
    sub.add_argument("--nu", type=float, nargs="*", default=None)
    sub.add_argument("--kernel", nargs="*", choices=["linear", "rbf"], default=None)
    sub.add_argument("--sigma2", type=float, nargs="*", default=None)
    sub.add_argument("--seed", type=int, nargs="*", default=None)
    sub.add_argument("--time-limit", type=float, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--cardinality", choices=["on", "off"], default=None)
    sub.add_argument("--out", default=None)


def cmd_cv(args) -> int:
    config = _config_from_args(args)
    rows = run_cross_validation(config)
    with open(os.path.join(config.out_dir, "report.txt")) as fh:
        print(fh.read(), end="")
    print(f"report: {os.path.join(config.out_dir, 'report.csv')} ({len(rows)} rows)")
    return EXIT_OK


def cmd_gap(args) -> int:
    config = _config_from_args(args)
    if args.mode is None and config.mode != "exact":
        config = config_from_dict({**config_to_dict(config), "mode": "exact"})
    rows = run_gap_study(config)
    print(f"incumbents: {os.path.join(config.out_dir, 'incumbents.csv')} ({len(rows)} rows)")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    written = emit_plot_data(args.results, args.out)
    for path in written:
        print(f"wrote {path}")
    if not written:
        print("no recognizable artifacts found", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msvdd",
        description="Multisphere support vector data description: exact and heuristic solvers",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("generate", help="generate a synthetic multimodal dataset")
    g.add_argument("--n-train", type=int, default=60)
    g.add_argument("--n-val", type=int, default=40)
    g.add_argument("--n-test", type=int, default=100)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="results")
    g.set_defaults(func=cmd_generate)

    s = subs.add_parser("solve", help="solve one instance and dump the solution")
    s.add_argument("--data", required=True, help="dataset CSV (x1..xd,label,split)")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    c = subs.add_parser("cv", help="cross-validated grid study")
    _add_grid_flags(c)
    c.set_defaults(func=cmd_cv)

    p = subs.add_parser("gap", help="incumbent/optimality-gap study (exact mode)")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_gap)

    d = subs.add_parser("plotdata", help="emit plot-ready CSVs from prior results")
    d.add_argument("--results", required=True)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MsvddError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
