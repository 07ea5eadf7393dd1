"""Command-line interface.

Three subcommands:

``gen-data``  regenerate a benchmark dataset file
``discover``  run the evolutionary search on a dataset file
``render``    pretty-print and check a computable string

Exit codes are stable: 0 success (``discover``: converged), 1 usage or
configuration error, 2 generation budget exhausted without reaching the AIC
threshold, 3 I/O or dataset-format error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .datasets import (
    BlowUpError,
    DatasetFormatError,
    PROBLEMS,
    StabilityError,
    preset,
    read_dataset,
    solve,
    write_dataset,
)
from .expr import Forest, GenConfig, ParseError, parse_computable_string, to_display_string, validate
from .ga import DiscoveryResult, GAConfig, evolve
from .regress import RegressionParams

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the exit-code contract
    # reserves 2 for "budget exhausted", so usage errors become 1.
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="pdeforest",
        description="Discover governing PDEs from gridded space-time data.",
    )
    parser.add_argument("--version", action="version", version=f"pdeforest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser(
        "gen-data",
        help="regenerate a benchmark dataset and write it to a file",
        description="Solve one of the built-in benchmark problems and write "
        "the stored grid as a dataset file.",
    )
    gen.add_argument("problem", help=f"one of: {', '.join(PROBLEMS)}")
    gen.add_argument("output", type=Path, help="dataset file to write")
    gen.add_argument("--nx", type=int, help="override spatial point count")
    gen.add_argument("--nt-store", type=int, help="override stored time slices")
    gen.add_argument("--t-max", type=float, help="override time horizon")
    gen.add_argument("--dt-internal", type=float, help="override solver step")
    gen.add_argument(
        "--subsample-every", type=int, help="override internal steps per stored slice"
    )
    gen.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override an equation parameter (repeatable)",
    )

    ga_defaults = GAConfig()
    reg_defaults = RegressionParams()
    disc = sub.add_parser(
        "discover",
        help="evolve symbolic PDE candidates against a dataset",
        description="Run the evolutionary search and write a run manifest, "
        "an evolution log (CSV: generation,aic,mse,k,equation) and a report.",
    )
    disc.add_argument("dataset", type=Path, help="dataset file (see gen-data)")
    disc.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    disc.add_argument(
        "--generations", type=int, default=ga_defaults.generations,
        help=f"generation budget (default {ga_defaults.generations})",
    )
    disc.add_argument(
        "--population", type=int, default=ga_defaults.population,
        help=f"population size, even (default {ga_defaults.population})",
    )
    disc.add_argument(
        "--max-depth", type=int, default=ga_defaults.max_depth,
        help=f"tree depth cap (default {ga_defaults.max_depth})",
    )
    disc.add_argument(
        "--max-width", type=int, default=ga_defaults.max_width,
        help=f"forest width cap (default {ga_defaults.max_width})",
    )
    disc.add_argument(
        "--p-operand", type=float, default=ga_defaults.p_operand,
        help=f"leaf probability during generation (default {ga_defaults.p_operand})",
    )
    disc.add_argument(
        "--p-mutate", type=float, default=ga_defaults.p_mutate_node,
        help=f"per-node mutation probability (default {ga_defaults.p_mutate_node})",
    )
    disc.add_argument(
        "--p-cross", type=float, default=ga_defaults.p_cross,
        help=f"per-slot crossover probability (default {ga_defaults.p_cross})",
    )
    disc.add_argument(
        "--p-replace", type=float, default=ga_defaults.p_replace_tree,
        help=f"per-candidate tree replacement probability (default {ga_defaults.p_replace_tree})",
    )
    disc.add_argument(
        "--lambda", dest="lam", type=float, default=reg_defaults.lam,
        help=f"ridge penalty (default {reg_defaults.lam})",
    )
    disc.add_argument(
        "--tol", type=float, default=reg_defaults.tol,
        help="coefficient threshold on the normalized-column scale "
        f"(default {reg_defaults.tol})",
    )
    disc.add_argument(
        "--max-sweeps", type=int, default=reg_defaults.max_sweeps,
        help=f"threshold iteration cap (default {reg_defaults.max_sweeps})",
    )
    disc.add_argument(
        "--aic-threshold", type=float, default=ga_defaults.aic_threshold,
        help=f"early-stop AIC (default {ga_defaults.aic_threshold})",
    )
    disc.add_argument(
        "--boundary-trim", type=int, default=ga_defaults.boundary_trim,
        help="grid lines dropped from each spatial/temporal edge "
        f"(default {ga_defaults.boundary_trim})",
    )
    disc.add_argument(
        "--out-dir", type=Path, default=Path("run"),
        help="directory for the manifest, evolution log and report (default ./run)",
    )

    rend = sub.add_parser(
        "render",
        help="parse a computable string and print its display form",
        description='Example: pdeforest render "{ / u x }"',
    )
    rend.add_argument("expression", help="prefix-notation computable string")
    return parser


def cmd_gen_data(args) -> int:
    problem = args.problem.strip().lower().replace("-", "_")
    if problem not in PROBLEMS:
        print(
            f"error: unknown problem {args.problem!r}; choose from {', '.join(PROBLEMS)}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    cfg = preset(problem)
    overrides = {}
    for field in ("nx", "nt_store", "t_max", "dt_internal", "subsample_every"):
        value = getattr(args, field)
        if value is not None:
            overrides[field] = value
    if args.param:
        params = dict(cfg.params)
        for item in args.param:
            name, eq, value = item.partition("=")
            if not eq:
                print(f"error: --param expects NAME=VALUE, got {item!r}", file=sys.stderr)
                return EXIT_USAGE
            params[name.strip()] = float(value)
        overrides["params"] = params
    try:
        cfg = dataclasses.replace(cfg, **overrides)
        ds = solve(cfg)
    except (StabilityError, ValueError, BlowUpError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        write_dataset(ds, args.output, problem=problem, params=cfg.params)
    except OSError as err:
        print(f"error: cannot write {args.output}: {err}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.output}: {cfg.nx} x {cfg.nt_store} grid (dx={cfg.dx:.6g}, dt={cfg.dt_store:.6g})")
    print(
        f"stepping: dt_internal={cfg.dt_internal:g} over {cfg.n_steps} steps "
        f"(stability limit {cfg.stability_limit():.6g})"
    )
    return EXIT_OK


def _dataset_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_artifacts(
    out_dir: Path, cfg: GAConfig, dataset_path: Path, result: DiscoveryResult,
    started: str, finished: str,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "evolution.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "aic", "mse", "k", "equation"])
        for entry in result.history:
            writer.writerow(
                [entry.generation, repr(entry.aic), repr(entry.mse), entry.k, entry.equation]
            )
    best = result.best.score
    report_path = out_dir / "report.txt"
    report = (
        f"dataset: {dataset_path}\n"
        f"converged: {result.converged}\n"
        f"generations run: {result.generations_run}\n"
        f"discovered equation: {result.equation_display}\n"
        f"terms (k): {best.k}\n"
        f"mse: {best.mse:.6e}\n"
        f"aic: {best.aic:.4f}\n"
    )
    report_path.write_text(report, encoding="utf-8")
    manifest = {
        "schema": 1,
        "generator": f"pdeforest-{__version__}",
        "command": "discover",
        "dataset": str(dataset_path),
        "dataset_sha256": _dataset_sha256(dataset_path),
        "started_at": started,
        "finished_at": finished,
        "config": {
            "seed": cfg.rng_seed,
            "generations": cfg.generations,
            "population": cfg.population,
            "p_operand": cfg.p_operand,
            "p_mutate_node": cfg.p_mutate_node,
            "p_cross": cfg.p_cross,
            "p_replace_tree": cfg.p_replace_tree,
            "max_width": cfg.max_width,
            "max_depth": cfg.max_depth,
            "aic_threshold": cfg.aic_threshold,
            "boundary_trim": cfg.boundary_trim,
            "lambda": cfg.regression.lam,
            "tol": cfg.regression.tol,
            "max_sweeps": cfg.regression.max_sweeps,
            "normalize_columns": cfg.regression.normalize_columns,
        },
        "outcome": {
            "converged": result.converged,
            "generations_run": result.generations_run,
            "equation": result.equation_display,
            "k": best.k,
            "mse": best.mse,
            "aic": best.aic,
        },
        "artifacts": {
            "evolution_log": str(log_path),
            "report": str(report_path),
        },
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def cmd_discover(args) -> int:
    try:
        ds = read_dataset(args.dataset)
    except OSError as err:
        print(f"error: cannot read {args.dataset}: {err}", file=sys.stderr)
        return EXIT_IO
    except DatasetFormatError as err:
        print(f"error: bad dataset {args.dataset}: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = GAConfig(
            generations=args.generations,
            population=args.population,
            p_operand=args.p_operand,
            p_mutate_node=args.p_mutate,
            p_cross=args.p_cross,
            p_replace_tree=args.p_replace,
            max_width=args.max_width,
            max_depth=args.max_depth,
            aic_threshold=args.aic_threshold,
            rng_seed=args.seed,
            boundary_trim=args.boundary_trim,
            regression=RegressionParams(
                lam=args.lam, tol=args.tol, max_sweeps=args.max_sweeps
            ),
        )
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    result = evolve(cfg, ds)
    finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    try:
        _write_run_artifacts(args.out_dir, cfg, args.dataset, result, started, finished)
    except OSError as err:
        print(f"error: cannot write artifacts to {args.out_dir}: {err}", file=sys.stderr)
        return EXIT_IO
    status = "converged" if result.converged else "budget exhausted"
    print(f"{status} after {result.generations_run} generation(s)")
    print(result.equation_display)
    best = result.best.score
    print(f"k={best.k}  mse={best.mse:.6e}  aic={best.aic:.4f}")
    print(f"artifacts in {args.out_dir}")
    return EXIT_OK if result.converged else EXIT_BUDGET


def cmd_render(args) -> int:
    try:
        tree = parse_computable_string(args.expression)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    print(to_display_string(tree))
    violations = validate(Forest((tree,)), GenConfig())
    if violations:
        for v in violations:
            print(f"rule {v.rule} violation at {v.path}: {v.message}")
        print("invalid (against the default depth-4 limits)")
    else:
        print("valid")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        print("run with --help for usage", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help / --version
        return int(err.code or 0)
    if args.command == "gen-data":
        return cmd_gen_data(args)
    if args.command == "discover":
        return cmd_discover(args)
    return cmd_render(args)


if __name__ == "__main__":
    sys.exit(main())
