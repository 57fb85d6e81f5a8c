"""Command-line front end: ``residci citest | pc | simulate | bench``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench
from .citests import CiQuery, make_tester
from .data import DataError, load_csv, save_csv
from .estimators import EstimationError
from .estimators.forest import ForestParams
from .estimators.glm import ConvergenceError
from .graphs import format_graph, random_dag, write_graph
from .pc import PcConfig, pc, write_test_log
from .simulate import SimSpec, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _csv_list(conv):
    def parse(text):
        try:
            return [conv(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _add_forest(p):
    p.add_argument("--n-trees", type=int, default=50)
    p.add_argument("--mtry", type=int, default=None)
    p.add_argument("--min-node-size", type=int, default=10)
    p.add_argument("--prediction-mode", choices=["out_of_bag", "all_trees"], default="out_of_bag")


def _forest(args) -> ForestParams:
    return ForestParams(n_trees=args.n_trees, mtry=args.mtry, min_node_size=args.min_node_size,
                        prediction_mode=args.prediction_mode, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="residci", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("citest", help="run one conditional independence test")
    c.add_argument("--data", required=True)
    c.add_argument("--schema", required=True)
    c.add_argument("--x", required=True)
    c.add_argument("--y", required=True)
    c.add_argument("--z", type=_csv_list(str), default=[])
    c.add_argument("--test", choices=["q", "g2", "g2mc"], default="q")
    c.add_argument("--estimator", default="glm")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--B", type=int, default=999)
    _add_forest(c)

    p = sub.add_parser("pc", help="learn a CPDAG with PC-stable")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-cond-size", type=int, default=None)
    p.add_argument("--test", choices=["q", "g2", "g2mc"], default="q")
    p.add_argument("--estimator", default="glm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--B", type=int, default=999)
    p.add_argument("--out", help="write the CPDAG edge list here")
    p.add_argument("--log", help="write the CI test log (CSV) here")
    _add_forest(p)

    s = sub.add_parser("simulate", help="write a simulated dataset")
    s.add_argument("protocol", choices=["calibration_null", "binary_discrimination",
                                        "ordinal_discrimination", "dag_logistic"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--beta", type=float, default=0.0)
    s.add_argument("--p-edge", type=float, default=0.0)
    s.add_argument("--dependent", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--schema-out", required=True)
    s.add_argument("--graph-out", help="dag_logistic only: write the true DAG edge list")

    b = sub.add_parser("bench", help="run a benchmark experiment")
    b.add_argument("experiment", choices=bench.EXPERIMENTS)
    b.add_argument("--tests", type=_csv_list(str), default=None,
                   help="comma list of q:glm, q:forest, q:saturated, g2, g2mc, oracle")
    b.add_argument("--n", type=_csv_list(int), default=[])
    b.add_argument("--k", type=_csv_list(int), default=[])
    b.add_argument("--beta", type=_csv_list(float), default=[])
    b.add_argument("--p-edge", type=_csv_list(float), default=[])
    b.add_argument("--alpha", type=_csv_list(float), default=[])
    b.add_argument("--replicates", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--n-vars", type=int, default=20)
    b.add_argument("--B", type=int, default=999)
    b.add_argument("--protocol", choices=["binary", "ordinal"], default="binary")
    b.add_argument("--variant", choices=["formula", "shifted"], default="formula")
    b.add_argument("--max-cond-size", type=int, default=None)
    b.add_argument("--tests-per-point", type=int, default=100)
    b.add_argument("--data")
    b.add_argument("--schema")
    b.add_argument("--truth", help="true graph edge list for file-based structure runs")
    b.add_argument("--out", help="CSV path (stdout when omitted)")
    return parser


def _citest(args) -> int:
    ds = load_csv(args.data, args.schema)
    q = CiQuery(args.x, args.y, tuple(args.z))
    for name in (q.x, q.y, *q.z):
        ds.index(name)
    tester = make_tester(args.test, args.estimator, seed=args.seed, B=args.B, forest_params=_forest(args))
    res = tester(ds, q)
    fam = getattr(res.family, "value", res.family)
    line = f"{fam} statistic={res.statistic:.6g} df={res.df} p={res.p_value:.6g}"
    if res.diagnostics.degenerate:
        line += f" degenerate ({res.diagnostics.note})"
    print(line)
    return EXIT_OK


def _pc(args) -> int:
    ds = load_csv(args.data, args.schema)
    cfg = PcConfig(alpha=args.alpha, max_cond_size=args.max_cond_size)
    tester = make_tester(args.test, args.estimator, seed=args.seed, B=args.B, forest_params=_forest(args))
    cpdag, skel = pc(ds, cfg, tester)
    text = format_graph(cpdag, ds.names)
    if args.out:
        write_graph(cpdag, args.out, ds.names)
    else:
        sys.stdout.write(text)
    if args.log:
        write_test_log(skel.log, args.log)
    return EXIT_OK


def _simulate(args) -> int:
    spec = SimSpec(args.protocol, args.n, args.k, args.beta, args.p_edge, args.dependent, args.seed)
    ds = simulate(spec)
    save_csv(ds, args.out, args.schema_out)
    if args.graph_out:
        if args.protocol != "dag_logistic":
            raise UsageError("--graph-out only applies to dag_logistic")
        write_graph(random_dag(args.k, args.p_edge, args.seed), args.graph_out, ds.names)
    return EXIT_OK


def _bench(args) -> int:
    kw = dict(experiment=args.experiment, n=args.n, k=args.k, beta=args.beta, p_edge=args.p_edge,
              alpha=args.alpha, replicates=args.replicates, seed=args.seed, jobs=args.jobs,
              n_vars=args.n_vars, B=args.B, protocol=args.protocol, variant=args.variant,
              max_cond_size=args.max_cond_size, data=args.data, schema=args.schema, truth=args.truth,
              tests_per_point=args.tests_per_point)
    if args.tests:
        kw["tests"] = args.tests
    try:
        cfg = bench.ExperimentConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = bench.run(cfg, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"citest": _citest, "pc": _pc, "simulate": _simulate, "bench": _bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"residci: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"residci: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, KeyError) as exc:
        print(f"residci: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, EstimationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"residci: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"residci: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
