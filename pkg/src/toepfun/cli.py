"""Command line entry point: ``toepfun table | spectrum | verify``."""

import argparse
import json
import logging
import sys

from . import experiments
from .exceptions import ToepfunError
from .genfn import experiment_symbols


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty size list")
    return values


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="toepfun", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", help="iteration-count table for one symbol and function")
    t.add_argument("--preset", choices=sorted(experiments.PRESETS), help="predefined experiment")
    t.add_argument("--symbol", help="catalog name, JSON trig polynomial or path to one")
    t.add_argument("--g", choices=("exp", "sin", "cos"))
    t.add_argument("--sizes", type=_int_list, default=[128, 256, 512, 1024])
    t.add_argument("--solvers", type=_str_list, help="columns such as cg,cg+c,minres+|c|,gmres+c")
    t.add_argument("--seed", type=int, default=experiments.DEFAULT_SEED)
    t.add_argument("--tol", type=float, default=1e-7)
    t.add_argument("--max-iter", type=int, default=100000)
    t.add_argument("--rhs", choices=("auto", "real", "complex"), default="auto")
    t.add_argument("--threads", type=int, help="worker threads (default: TOEPFUN_THREADS or cpu count)")
    t.add_argument("--out", help="write the JSON document here")
    t.add_argument("--no-history", action="store_true", help="omit residual histories from the JSON")

    s = sub.add_parser("spectrum", help="eigenvalue cloud as headerless re,im CSV")
    s.add_argument("--symbol", required=True)
    s.add_argument("--g", required=True, choices=("exp", "sin", "cos"))
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--variant", choices=experiments.SPECTRUM_VARIANTS, default="preconditioned")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.add_argument("--report", help="write the cluster report JSON here (default: stderr summary)")

    v = sub.add_parser("verify", help="run the invariant checks; exit 1 on any failure")
    v.add_argument("--sizes", type=_int_list, default=[64, 128, 256])
    v.add_argument(
        "--symbols",
        default="catalog",
        help="'catalog', 'trig', or comma separated symbol names",
    )
    v.add_argument("--seed", type=int, default=experiments.DEFAULT_SEED)
    v.add_argument("--out", help="write the JSON summary here (default: stdout)")
    return parser


def _table(args, parser):
    if args.preset:
        symbol, g, solvers = experiments.PRESETS[args.preset]
        symbol = args.symbol or symbol
        g = args.g or g
        solvers = args.solvers or solvers
    else:
        if not (args.symbol and args.g and args.solvers):
            parser.error("table needs --preset or all of --symbol, --g and --solvers")
        symbol, g, solvers = args.symbol, args.g, args.solvers
    spec = experiments.ExperimentSpec(
        symbol, g, args.sizes, solvers, seed=args.seed, tol=args.tol, max_iter=args.max_iter, rhs=args.rhs
    )
    table = experiments.run_table(spec, threads=args.threads)
    if args.no_history:
        for row in table["rows"]:
            for cell in row["cells"].values():
                cell.pop("residual_history", None)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(experiments.table_to_json(table))
    print(experiments.format_table(table))
    return 0


def _spectrum(args):
    eigs, report = experiments.run_spectrum(args.symbol, args.g, args.n, args.variant, args.eps)
    csv_text = experiments.spectrum_to_csv(eigs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=1)
    summary = {k: report[k] for k in ("n", "variant", "outlier_count", "cluster_radius", "pm1_fraction")}
    print(json.dumps(summary), file=sys.stderr)
    return 0


def _verify(args):
    if args.symbols == "catalog":
        symbols = experiment_symbols()
    elif args.symbols == "trig":
        symbols = dict(experiments.DEFAULT_TRIG_SYMBOLS)
    else:
        symbols = _str_list(args.symbols)
    result = experiments.run_verification_suite(args.sizes, symbols, seed=args.seed)
    text = json.dumps(result, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    for check in result["checks"]:
        if not check["passed"]:
            print(f"FAILED {check['module']}.{check['name']}: {check['detail']}", file=sys.stderr)
    print(f"{result['n_checks'] - result['n_failed']}/{result['n_checks']} checks passed", file=sys.stderr)
    return 0 if result["passed"] else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        if args.command == "table":
            return _table(args, parser)
        if args.command == "spectrum":
            return _spectrum(args)
        return _verify(args)
    except (ToepfunError, ValueError, FileNotFoundError) as exc:
        print(f"toepfun: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
