"""Command-line front end: recovery, benchmarking, and RIP certification.

Exit codes: 0 on success, 1 on input or configuration errors (including
unknown flags and refused enumerations), 2 on numerical failures such as a
degenerate dictionary. Matrix and vector files are plain text: a first
line "rows cols", then the entries row-major, whitespace-separated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .benchlab import emit_report, reference_configs, run_sweep
from .linalg import DegenerateColumnError
from .pursuit import (
    ADAPTIVE_MULTIPLICATIVE,
    MULTIPLICATIVE,
    CostModel,
    DegenerateDictionaryError,
    PursuitConfig,
    TerminationRule,
    run_aomp,
    run_mmp_bf,
    run_mmp_df,
    run_omp,
)
from .ripcert import EnumerationCapError, compute_ric, lemma1_bounds

__all__ = ["main"]

DEFAULT_SEED = 1


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; this front end reserves 2 for
    numerical failures and reports every input problem as exit 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_array(path):
    try:
        with open(path, encoding="utf-8") as fh:
            tokens = fh.read().split()
    except OSError as err:
        raise ValueError(f"cannot read {path}: {err}") from err
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = [float(t) for t in tokens[2:]]
    except ValueError as err:
        raise ValueError(f"{path}: {err}") from err
    if rows < 1 or cols < 1:
        raise ValueError(f"{path}: bad dimensions {rows} x {cols}")
    if len(values) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, "
                         f"got {len(values)}")
    return np.array(values, dtype=np.float64).reshape(rows, cols)


def _read_vector(path):
    arr = _read_array(path)
    if 1 not in arr.shape:
        raise ValueError(f"{path}: expected a vector, got shape {arr.shape}")
    return arr.ravel()


def _write_vector(path, vec):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{vec.shape[0]} 1\n")
        for v in vec:
            fh.write(f"{v:.17g}\n")


def _parse_k_values(text):
    """Sparsity grid: a single value, a comma list, or start:step:stop."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad sparsity range {text!r}; use start:step:stop")
        start, step, stop = (int(p) for p in parts)
        if step < 1 or stop < start:
            raise ValueError(f"bad sparsity range {text!r}")
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",")]


def _default_seed():
    env = os.environ.get("PURSUIT_LAB_SEED")
    return int(env) if env else DEFAULT_SEED


# --- recover ---------------------------------------------------------------------

def _termination_from(args):
    if (args.k is None) == (args.eps is None):
        raise ValueError("give exactly one of --k or --eps")
    if args.k is not None:
        return TerminationRule.sparsity(args.k)
    return TerminationRule.residual(args.eps, k_max=args.kmax)


def _cmd_recover(args):
    a = _read_array(args.matrix)
    y = _read_vector(args.signal)
    rule = _termination_from(args)
    alpha = args.alpha if args.alpha is not None else \
        (0.97 if args.cost == "amul" else 0.8)
    kind = ADAPTIVE_MULTIPLICATIVE if args.cost == "amul" else MULTIPLICATIVE
    config = PursuitConfig(args.alg, rule,
                           branch_factor=args.l, beam_width=args.beam,
                           init_paths=args.i, expand_branches=args.b,
                           max_paths=args.max_paths,
                           cost_model=CostModel(kind=kind, alpha=alpha))
    if args.alg == "omp":
        result = run_omp(a, y, rule)
    elif args.alg == "mmp-bf":
        result = run_mmp_bf(a, y, config)
    elif args.alg == "mmp-df":
        result = run_mmp_df(a, y, config)
    else:
        result = run_aomp(a, y, config)
    _write_vector(args.output, result.estimate)
    print(f"support: {' '.join(str(j) for j in sorted(result.support))}")
    print(f"residual_norm: {result.residual_norm:.12g}")
    print(f"iterations: {result.iterations}")
    print(f"explored_nodes: {result.explored_nodes}")
    print(f"terminated_by: {result.terminated_by}")
    print(f"estimate written to {args.output}")
    return 0


# --- bench -----------------------------------------------------------------------

def _cmd_bench(args):
    n = args.n if args.n is not None else 256
    m = args.m if args.m is not None else 100
    k_text = args.k if args.k is not None else "10:5:50"
    trials = args.trials if args.trials is not None else \
        (500 if args.reference_defaults else 100)
    k_values = _parse_k_values(k_text)
    configs = reference_configs(epsilon_rel=args.eps, k_max=args.kmax)
    seed = args.seed if args.seed is not None else _default_seed()
    report = run_sweep(n, m, k_values, trials, configs, seed,
                       exact_tol=args.exact_tol, jobs=args.jobs,
                       trial_log=args.trial_log,
                       normalize_columns=args.normalize_columns,
                       flat_amplitudes=args.flat_amplitudes)
    emit_report(report, "csv", path=args.csv)
    emit_report(report, "json", path=args.json)
    print(f"{'K':>4} {'algorithm':>10} {'exact_rate':>11} {'anmse':>12} "
          f"{'iterations':>11} {'nodes':>10}")
    for c in report.cells:
        print(f"{c.k:>4} {c.algorithm:>10} {c.exact_rate:>11.3f} "
              f"{c.anmse:>12.5g} {c.mean_iterations:>11.1f} "
              f"{c.mean_explored_nodes:>10.1f}")
    print(f"reports written to {args.csv} and {args.json}")
    return 0


# --- rip / bounds ------------------------------------------------------------------

def _print_bound_checks(delta, pair):
    for name, bound in (("loose", pair.bound_loose), ("tight", pair.bound_tight)):
        verdict = "PASS" if delta < bound else "FAIL"
        print(f"bound_{name}: {bound:.12g} {verdict}")


def _cmd_rip(args):
    a = _read_array(args.matrix)
    if (args.k is None) != (args.l is None):
        raise ValueError("give both --k and --l or neither")
    if args.k is not None:
        k, l = args.k, args.l
        if k + l != args.s:
            raise ValueError(f"--k {k} plus --l {l} must equal --s {args.s}")
    else:
        k, l = args.s - 1, 1
    if k < 1:
        raise ValueError("--s must be at least 2 to split into k and l")
    cert = compute_ric(a, args.s, subset_cap=args.cap)
    pair = lemma1_bounds(k, l)
    print(f"subset_size: {cert.subset_size}")
    print(f"delta: {cert.delta:.12g}")
    print(f"extremal_subset: {' '.join(str(j) for j in cert.extremal_subset)}")
    print(f"split: k={k} l={l}")
    _print_bound_checks(cert.delta, pair)
    if args.json:
        doc = {"subset_size": cert.subset_size,
               "delta": float(f"{cert.delta:.12g}"),
               "extremal_subset": list(cert.extremal_subset),
               "matrix_digest": cert.matrix_digest}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"certificate written to {args.json}")
    return 0


def _cmd_bounds(args):
    pair = lemma1_bounds(args.k, args.l)
    print(f"bound_loose: {pair.bound_loose:.12g}")
    print(f"bound_tight: {pair.bound_tight:.12g}")
    ordering = "PASS" if pair.bound_loose > pair.bound_tight else "FAIL"
    print(f"ordering (loose > tight): {ordering}")
    if args.json:
        doc = {"k": args.k, "l": args.l,
               "bound_loose": float(f"{pair.bound_loose:.12g}"),
               "bound_tight": float(f"{pair.bound_tight:.12g}")}
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"bounds written to {args.json}")
    return 0


# --- parser ----------------------------------------------------------------------

def _build_parser():
    parser = _Parser(prog="pursuitlab",
                     description="Sparse recovery by tree-search matching "
                                 "pursuits, with RIP certification and a "
                                 "Monte-Carlo benchmark harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("recover", help="recover a sparse signal from one "
                                         "observation")
    rec.add_argument("matrix", help="dictionary file ('rows cols' header, "
                                    "row-major entries)")
    rec.add_argument("signal", help="observation vector file")
    rec.add_argument("--alg", required=True,
                     choices=["omp", "mmp-bf", "mmp-df", "aomp"],
                     help="search algorithm")
    rec.add_argument("--k", type=int, default=None,
                     help="sparsity-rule target: stop at exactly k columns")
    rec.add_argument("--eps", type=float, default=None,
                     help="residual-rule threshold relative to the "
                          "observation norm")
    rec.add_argument("--kmax", type=int, default=55,
                     help="support-size cap under the residual rule "
                          "(default 55)")
    rec.add_argument("--l", type=int, default=6,
                     help="children ranked per expanded path, depth/breadth "
                          "search (default 6)")
    rec.add_argument("--beam", type=int, default=4,
                     help="surviving paths per level, breadth search "
                          "(default 4)")
    rec.add_argument("--i", type=int, default=3,
                     help="initial paths, best-first search (default 3)")
    rec.add_argument("--b", type=int, default=2,
                     help="children per expansion, best-first search "
                          "(default 2)")
    rec.add_argument("--max-paths", type=int, default=200,
                     help="path budget / open-set cap (default 200)")
    rec.add_argument("--cost", choices=["mul", "amul"], default="mul",
                     help="best-first cost model: fixed decay or "
                          "progress-adaptive decay (default mul)")
    rec.add_argument("--alpha", type=float, default=None,
                     help="cost decay per remaining level (default 0.8 for "
                          "mul, 0.97 for amul)")
    rec.add_argument("--output", default="estimate.txt",
                     help="estimate output file (default estimate.txt)")
    rec.set_defaults(func=_cmd_recover)

    ben = sub.add_parser("bench", help="run a paired Monte-Carlo sweep of "
                                       "the four benchmark configurations")
    ben.add_argument("--n", type=int, default=None,
                     help="dictionary columns (default 256)")
    ben.add_argument("--m", type=int, default=None,
                     help="dictionary rows (default 100)")
    ben.add_argument("--k", default=None,
                     help="sparsity grid: one value, a comma list, or "
                          "start:step:stop (default 10:5:50)")
    ben.add_argument("--trials", type=int, default=None,
                     help="trials per sparsity level (default 100)")
    ben.add_argument("--reference-defaults", action="store_true",
                     help="run the full reference protocol: N=256 M=100 "
                          "K=10:5:50 with 500 trials per level")
    ben.add_argument("--seed", type=int, default=None,
                     help="global seed (default: PURSUIT_LAB_SEED or "
                          f"{DEFAULT_SEED})")
    ben.add_argument("--eps", type=float, default=1e-6,
                     help="residual-rule threshold for the *-e "
                          "configurations (default 1e-6)")
    ben.add_argument("--kmax", type=int, default=55,
                     help="residual-rule support cap (default 55)")
    ben.add_argument("--exact-tol", type=float, default=1e-2,
                     help="relative error below which recovery counts as "
                          "exact (default 1e-2)")
    ben.add_argument("--jobs", type=int, default=1,
                     help="worker processes; the report is identical for "
                          "any value except wall-time means (default 1)")
    ben.add_argument("--csv", default="bench.csv",
                     help="CSV report path (default bench.csv)")
    ben.add_argument("--json", default="bench.json",
                     help="JSON report path (default bench.json)")
    ben.add_argument("--trial-log", default=None,
                     help="optional JSON-lines per-trial log path")
    ben.add_argument("--normalize-columns", action="store_true",
                     help="normalize dictionary columns to unit norm")
    ben.add_argument("--flat-amplitudes", action="store_true",
                     help="draw nonzero signal values as random signs "
                          "instead of Gaussians")
    ben.set_defaults(func=_cmd_bench)

    rip = sub.add_parser("rip", help="certify the restricted isometry "
                                     "constant of a dictionary file")
    rip.add_argument("matrix", help="dictionary file")
    rip.add_argument("--s", type=int, required=True,
                     help="subset size to certify")
    rip.add_argument("--k", type=int, default=None,
                     help="sparsity part of the (k, l) split "
                          "(default: s-1)")
    rip.add_argument("--l", type=int, default=None,
                     help="branch part of the (k, l) split (default: 1)")
    rip.add_argument("--cap", type=int, default=2_000_000,
                     help="refuse enumerations beyond this many subsets "
                          "(default 2000000)")
    rip.add_argument("--json", default=None,
                     help="optional certificate JSON output path")
    rip.set_defaults(func=_cmd_rip)

    bnd = sub.add_parser("bounds", help="print both sufficient-recovery "
                                        "thresholds for a (k, l) pair")
    bnd.add_argument("--k", type=int, required=True, help="sparsity")
    bnd.add_argument("--l", type=int, required=True, help="branch width")
    bnd.add_argument("--json", default=None,
                     help="optional bounds JSON output path")
    bnd.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else 0
    try:
        return args.func(args)
    except (DegenerateDictionaryError, DegenerateColumnError,
            np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except EnumerationCapError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
