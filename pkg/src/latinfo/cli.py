"""Command-line front end.

Exit codes: 0 success, 1 failed validation, 2 input error, 3 estimator
precondition error. Flags override ``LATINFO_*`` environment variables,
which override built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import divergence
from .divergence import EstimatorConfig, EstimatorError, GaussianSpec
from .lattice import LatticeError, SetPartition, build_lattice
from .measures import (
    EmpiricalSession,
    generalized_si,
    measure_report,
    select_features,
    subsets_for_scan,
)
from .synth import (
    FAMILY_BLOCKS,
    DataError,
    SampleMatrix,
    copy_gate,
    provenance_json,
    sample_gaussian,
    sigma_family,
    table1_dataset,
    xor_gate,
)
from .validation import SUITES, run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_ESTIMATOR = 0, 1, 2, 3
LONG_FIELDS = ("subset", "measure", "order", "value", "p_value", "alpha", "k", "seed")


class InputError(Exception):
    pass


def _env(name: str, cast, default):
    raw = os.environ.get(f"LATINFO_{name}")
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise InputError(f"LATINFO_{name}={raw!r} is not a valid {cast.__name__}") from None


def _config(args, permutations_default: int = 0) -> EstimatorConfig:
    alpha = args.alpha if args.alpha is not None else _env("ALPHA", float, 0.5)
    k = args.k if args.k is not None else _env("K", int, 30)
    seed = args.seed if args.seed is not None else _env("SEED", int, 0)
    perms = args.permutations if args.permutations is not None else permutations_default
    try:
        return EstimatorConfig(alpha=alpha, k=k, seed=seed, tie_policy=args.tie_policy, permutations=perms)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _threads(args) -> None:
    threads = args.threads if getattr(args, "threads", None) is not None else _env("THREADS", int, 1)
    if threads == 0 or threads < -1:
        raise InputError("threads must be a positive integer or -1 (all cores)")
    divergence.QUERY_WORKERS = threads


def _read(path) -> SampleMatrix:
    if path in (None, "-"):
        return SampleMatrix.from_csv(sys.stdin)
    return SampleMatrix.from_csv(path)


def _columns(text: str | None) -> list[str] | None:
    if text is None:
        return None
    cols = [c.strip() for c in text.split(",")]
    if any(not c for c in cols):
        raise InputError(f"empty name in column list {text!r}")
    return cols


def _emit(text: str, output) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(output).write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _long_rows(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LONG_FIELDS)
    for rep in reports:
        writer.writerow([
            "+".join(rep.variables),
            rep.measure,
            rep.order,
            repr(float(rep.value)),
            "" if rep.null is None else repr(rep.null.p_value),
            repr(float(rep.alpha)),
            "" if rep.config is None else rep.config.k,
            "" if rep.config is None else rep.config.seed,
        ])
    return buf.getvalue()


def _analytic_source(args) -> GaussianSpec:
    if args.family:
        try:
            return sigma_family(args.family, args.rho, args.w0)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    table = _read(args.input)
    if table.n != table.d:
        raise InputError(f"analytic mode expects a square covariance table, got {table.n}x{table.d}")
    try:
        return GaussianSpec(table.values)
    except ValueError as exc:
        raise InputError(f"covariance: {exc}") from None


def cmd_measure(args) -> int:
    cols = _columns(args.columns)
    if args.mode == "analytic-gaussian":
        source = _analytic_source(args)
        if cols is None:
            cols = [f"X{i + 1}" for i in range(source.dim)]
        alpha = args.alpha if args.alpha is not None else _env("ALPHA", float, None)
        cfg = None
    else:
        source = _read(args.input)
        cfg = _config(args)
        alpha = None
        if cols is None:
            cols = list(source.columns)
    if args.order is not None and args.order != len(cols):
        raise InputError(f"--order {args.order} does not match {len(cols)} columns")
    if args.partition:
        pi = SetPartition.parse(args.partition)
        report = generalized_si(source, pi, cols, cfg, alpha=alpha)
    else:
        report = measure_report(args.measure, source, cols, cfg, alpha=alpha)
    _emit(report.to_json() + "\n" if args.format == "json" else _long_rows([report]), args.output)
    return EXIT_OK


def cmd_scan(args) -> int:
    data = _read(args.input)
    cfg = _config(args)
    if not 2 <= args.order <= 5:
        raise InputError("scans support orders 2..5")
    pool = _columns(args.columns) or list(data.columns)
    data.column_index(pool)
    try:
        subsets = subsets_for_scan(pool, args.order, cap=args.cap, sample=args.sample, seed=cfg.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    session = EmpiricalSession(data, cfg)
    reports = [measure_report(args.measure, data, s, cfg, session=session) for s in subsets]
    if args.format == "json":
        _emit(_dumps([r.to_dict() for r in reports]), args.output)
    else:
        _emit(_long_rows(reports), args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _env("SEED", int, 0)
    try:
        if args.generator == "gaussian":
            if args.rho is None:
                raise InputError("gaussian synth needs --rho")
            data = sample_gaussian(sigma_family(args.family, args.rho, args.w0), args.n, seed)
            data.provenance["params"].update(family=args.family, rho=args.rho, w0=args.w0)
        elif args.generator in ("xor", "copy"):
            coupled = args.n if args.coupled is None else args.coupled
            data = (xor_gate if args.generator == "xor" else copy_gate)(args.n, coupled, seed)
        else:
            data = table1_dataset(args.n, seed)
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from None
    _emit(data.to_csv(), args.output)
    sidecar = args.provenance
    if sidecar is None and args.output not in (None, "-"):
        sidecar = f"{args.output}.provenance.json"
    if sidecar:
        Path(sidecar).write_text(provenance_json(data) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_lattice(args) -> int:
    try:
        lat = build_lattice(args.d)
    except LatticeError as exc:
        raise InputError(str(exc)) from None
    _emit(json.dumps(lat.to_dict()) + "\n", args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_suite(args.suite, echo=lambda line: print(line, flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_select_features(args) -> int:
    data = _read(args.input)
    if args.target not in data.columns:
        raise InputError(f"target {args.target!r} is not a column")
    cfg = _config(args, permutations_default=500)
    result = select_features(data, args.target, max_set=args.max_set, cfg=cfg, level=args.level, null=args.null)
    if args.format == "json":
        rows = [{**row, "subset": list(row["subset"])} for row in result.rows]
        _emit(_dumps({
            "target": result.target,
            "selected": list(result.selected),
            "level": result.level,
            "config": cfg.to_dict(),
            "rows": rows,
        }), args.output)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("subset", "order", "value", "p_value", "q_value", "significant", "selected"))
        for row in result.rows:
            writer.writerow(("+".join(row["subset"]), row["order"], repr(row["value"]), repr(row["p_value"]),
                             repr(row["q_value"]), int(row["significant"]),
                             int(tuple(row["subset"]) == result.selected)))
        _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _estimator_flags(p: argparse.ArgumentParser, permutations_help: str = "null replicates (default 0)") -> None:
    p.add_argument("--alpha", type=float, help="Tsallis order in (0, 1) (default 0.5, env LATINFO_ALPHA)")
    p.add_argument("--k", type=int, help="neighbour count (default 30, env LATINFO_K)")
    p.add_argument("--seed", type=int, help="master seed (default 0, env LATINFO_SEED)")
    p.add_argument("--permutations", type=int, help=permutations_help)
    p.add_argument("--tie-policy", choices=divergence.TIE_POLICIES, default="error")
    p.add_argument("--threads", type=int, help="neighbour-search threads (default 1, env LATINFO_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latinfo", description="Lattice-based higher-order information measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="one measure on a set of columns")
    p.add_argument("--input", help="CSV file, '-' for stdin")
    p.add_argument("--output", help="output file (default stdout)")
    p.add_argument("--measure", type=str.upper, choices=("SI", "LI", "TC", "II"), default="SI")
    p.add_argument("--order", type=int)
    p.add_argument("--columns", help="comma-separated column names (default all)")
    p.add_argument("--partition", help="generalised SI below this partition, e.g. 12|34")
    p.add_argument("--mode", choices=("empirical", "analytic-gaussian"), default="empirical")
    p.add_argument("--family", choices=sorted(FAMILY_BLOCKS), help="analytic mode: built-in covariance family")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--w0", type=float, default=0.5)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _estimator_flags(p)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("scan", help="a measure on every subset of a given order")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--measure", type=str.upper, choices=("SI", "LI", "TC"), default="SI")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--columns", help="restrict the scan to these columns")
    p.add_argument("--cap", type=int, default=5000, help="maximum number of subsets without --sample")
    p.add_argument("--sample", type=int, help="evaluate this many seeded random subsets")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    _estimator_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    p.add_argument("generator", choices=("gaussian", "xor", "copy", "table1"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--family", choices=sorted(FAMILY_BLOCKS), default="sigma1")
    p.add_argument("--rho", type=float)
    p.add_argument("--w0", type=float, default=0.5)
    p.add_argument("--coupled", type=int, help="coupled rows for xor/copy (default n)")
    p.add_argument("--output")
    p.add_argument("--provenance", help="provenance JSON path (default OUTPUT.provenance.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lattice", help="export the partition lattice as JSON")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("validate", help="run acceptance checks")
    p.add_argument("suite", choices=SUITES, nargs="?", default="all")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("select-features", help="smallest significant feature set for a target")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--target", required=True)
    p.add_argument("--max-set", type=int, default=3)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--null", choices=("pooled", "shuffle"), default="pooled")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _estimator_flags(p, "null replicates (default 500)")
    p.set_defaults(func=cmd_select_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if hasattr(args, "threads"):
            _threads(args)
        return args.func(args)
    except EstimatorError as exc:
        print(f"estimator error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (InputError, DataError, LatticeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
